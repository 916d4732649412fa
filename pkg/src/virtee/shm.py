"""Shared-memory regions backing region-backed memory references.

Each region is an ordinary file in a shared-memory filesystem (or the
runtime directory as a fallback), mapped with mmap by every process that
holds its attach token.  The token is simply the file path; the Manager
is the only process that creates and unlinks the backing files.
"""

from __future__ import annotations

import mmap
import os
import secrets
from pathlib import Path


class ShmError(Exception):
    pass


def backing_dir() -> Path:
    shm = Path("/dev/shm")
    if shm.is_dir() and os.access(shm, os.W_OK):
        return shm
    from .config import runtime_dir

    d = runtime_dir()
    d.mkdir(parents=True, exist_ok=True)
    return d


def create_region(region_id: int, size: int) -> str:
    """Create a zero-filled backing file; returns the attach token."""
    if size <= 0:
        raise ShmError("region size must be positive")
    path = backing_dir() / (
        f"virtee-{os.getpid()}-{region_id}-{secrets.token_hex(4)}.shm"
    )
    fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_RDWR, 0o600)
    try:
        os.ftruncate(fd, size)
    finally:
        os.close(fd)
    return str(path)


def unlink_region(token: str) -> None:
    try:
        os.unlink(token)
    except FileNotFoundError:
        pass


class AttachedRegion:
    """A mapped view of a region's backing file."""

    def __init__(self, token: str, size: int):
        try:
            fd = os.open(token, os.O_RDWR)
        except OSError as exc:
            raise ShmError(f"cannot attach region {token}: {exc}") from None
        try:
            actual = os.fstat(fd).st_size
            if actual < size:
                raise ShmError(
                    f"region backing file is {actual} bytes, expected {size}"
                )
            self.map = mmap.mmap(fd, size)
        finally:
            os.close(fd)
        self.token = token
        self.size = size
        self._closed = False

    @property
    def buffer(self) -> memoryview:
        return memoryview(self.map)

    def close(self) -> None:
        if self._closed:
            return
        try:
            self.map.close()
        except BufferError:
            # A memoryview into the map is still alive somewhere; the
            # mapping is reclaimed at process exit instead.
            pass
        self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
