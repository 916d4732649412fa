"""Per-TA secure storage.

Objects live under ``storage_root/<uuid-hex>/<objectid-hex>`` with a
16-byte metadata header; writes are atomic via write-temp-then-rename.
Namespacing is structural: every operation takes the owning TA's UUID
and cannot address another TA's directory.  Layout details are in
docs/storage.md.
"""

from __future__ import annotations

import os
import struct
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from uuid import UUID

from . import codes

OBJECT_MAGIC = b"VTSO"
STORAGE_VERSION = 1
HEADER_LEN = 16
_HEADER = struct.Struct("<4sBBHII")  # magic, version, flags, pad, length, created

MIN_OBJECT_ID = 1
MAX_OBJECT_ID = 64


class StorageError(Exception):
    """Internal corruption or I/O failure, distinct from GP return codes."""


@dataclass
class StorageObject:
    ta_uuid: UUID
    object_id: bytes
    flags: int
    data: bytes
    created: int
    modified: int


def _valid_object_id(object_id: bytes) -> bool:
    return isinstance(object_id, (bytes, bytearray)) and \
        MIN_OBJECT_ID <= len(object_id) <= MAX_OBJECT_ID


class SecureStorage:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _object_path(self, ta_uuid: UUID, object_id: bytes) -> Path:
        return self.root / ta_uuid.hex / bytes(object_id).hex()

    def put(self, ta_uuid: UUID, object_id: bytes, flags: int, data: bytes,
            pre_rename_hook=None) -> int:
        """Persist an object atomically.  Existing objects require the
        overwrite flag.  ``pre_rename_hook`` is a fault-injection point
        for crash-atomicity tests."""
        if not _valid_object_id(object_id):
            return codes.ERROR_BAD_PARAMETERS
        path = self._object_path(ta_uuid, object_id)
        created = int(time.time())
        if path.exists():
            if not flags & 0x08:  # STORAGE_OVERWRITE
                return codes.ERROR_ACCESS_CONFLICT
            try:
                old = self._read_raw(path)
                created = old[2]
            except StorageError:
                pass
        path.parent.mkdir(parents=True, exist_ok=True)
        header = _HEADER.pack(OBJECT_MAGIC, STORAGE_VERSION, flags & 0xFF, 0,
                              len(data), created)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".put-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(header)
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            if pre_rename_hook is not None:
                pre_rename_hook()
            os.replace(tmp, path)
        except OSError:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            return codes.ERROR_GENERIC
        return codes.SUCCESS

    def _read_raw(self, path: Path) -> tuple[int, bytes, int]:
        """Returns (flags, data, created)."""
        raw = path.read_bytes()
        if len(raw) < HEADER_LEN:
            raise StorageError(f"truncated object file {path}")
        magic, version, flags, _, length, created = _HEADER.unpack(raw[:HEADER_LEN])
        if magic != OBJECT_MAGIC or version != STORAGE_VERSION:
            raise StorageError(f"bad object header in {path}")
        data = raw[HEADER_LEN:]
        if len(data) != length:
            raise StorageError(
                f"object {path} is {len(data)} bytes, header says {length}"
            )
        return flags, data, created

    def get(self, ta_uuid: UUID, object_id: bytes):
        """Returns (code, StorageObject | None)."""
        if not _valid_object_id(object_id):
            return codes.ERROR_BAD_PARAMETERS, None
        path = self._object_path(ta_uuid, object_id)
        if not path.exists():
            return codes.ERROR_ITEM_NOT_FOUND, None
        try:
            flags, data, created = self._read_raw(path)
        except (StorageError, OSError):
            return codes.ERROR_BAD_FORMAT, None
        obj = StorageObject(
            ta_uuid=ta_uuid,
            object_id=bytes(object_id),
            flags=flags,
            data=data,
            created=created,
            modified=int(path.stat().st_mtime),
        )
        return codes.SUCCESS, obj

    def delete(self, ta_uuid: UUID, object_id: bytes) -> int:
        if not _valid_object_id(object_id):
            return codes.ERROR_BAD_PARAMETERS
        path = self._object_path(ta_uuid, object_id)
        try:
            os.unlink(path)
        except FileNotFoundError:
            return codes.ERROR_ITEM_NOT_FOUND
        except OSError:
            return codes.ERROR_GENERIC
        return codes.SUCCESS

    def list_objects(self, ta_uuid: UUID) -> list[bytes]:
        d = self.root / ta_uuid.hex
        if not d.is_dir():
            return []
        out = []
        for name in sorted(os.listdir(d)):
            if name.startswith("."):
                continue
            try:
                out.append(bytes.fromhex(name))
            except ValueError:
                continue
        return out
