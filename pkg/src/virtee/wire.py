"""Binary message protocol between framework processes.

Every frame is a fixed little-endian header followed by a type-specific
payload.  The layout is the compatibility contract between all framework
processes and is documented bit-exactly in docs/wire.md together with
golden test vectors.

Encode/decode are pure; the stream helpers at the bottom implement
blocking framing over a connected socket, and FrameAssembler implements
the incremental variant used by event-driven readers.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from uuid import UUID

MAGIC = b"VTEE"
WIRE_VERSION = 1
HEADER_LEN = 24
DEFAULT_PAYLOAD_CAP = 8 * 1024 * 1024

_HEADER = struct.Struct("<4sBBHIIII")


class WireError(Exception):
    pass


class ProtocolError(WireError):
    """Bad magic, wrong version, unknown message type or malformed body."""


class FramingError(WireError):
    """Frame shorter than its header promised."""


class ConnectionClosed(WireError):
    """Peer hung up (possibly mid-frame)."""


class EncodeError(WireError):
    """Body does not match its declared layout: a programming bug."""


class MsgType(IntEnum):
    OPEN_SESSION_REQUEST = 1
    OPEN_SESSION_RESPONSE = 2
    INVOKE_REQUEST = 3
    INVOKE_RESPONSE = 4
    CLOSE_SESSION = 5
    FINALIZE_CONTEXT = 6
    REGISTER_SHARED_MEMORY = 7
    SHARED_MEMORY_GRANTED = 8
    RELEASE_SHARED_MEMORY = 9
    LAUNCH_TA = 10
    TA_READY = 11
    LAUNCH_FAILED = 12
    PEER_DEAD = 13
    CONTROL_STATUS = 14
    CONTROL_STATUS_REPLY = 15
    SHUTDOWN = 16
    STORAGE_PUT = 17
    STORAGE_GET = 18
    STORAGE_DELETE = 19
    STORAGE_REPLY = 20
    RESCAN = 21
    LIST_TAS = 22
    TA_LIST_REPLY = 23


class Direction(IntEnum):
    IN = 0
    OUT = 1
    INOUT = 2


# Shared-memory flag bits
SHM_INPUT = 0x01
SHM_OUTPUT = 0x02

# Storage access flag bits
STORAGE_READ = 0x01
STORAGE_WRITE = 0x02
STORAGE_WRITE_META = 0x04
STORAGE_OVERWRITE = 0x08

# TA state values carried in TAListReply
TA_STATE_NOT_LOADED = 0
TA_STATE_LAUNCHING = 1
TA_STATE_RUNNING = 2
TA_STATE_DEAD = 3


# ---------------------------------------------------------------------------
# Parameter block


@dataclass
class ValueParam:
    direction: Direction
    a: int = 0
    b: int = 0


@dataclass
class MemRefParam:
    """Memory-reference parameter.

    Region-backed iff region_id is not None; otherwise inline, with the
    buffer contents copied through the socket.  For inline references
    ``length`` is the declared buffer size, which may exceed len(data)
    for output-direction requests.
    """

    direction: Direction
    data: bytes = b""
    length: int = 0
    region_id: int | None = None
    offset: int = 0


Param = ValueParam | MemRefParam | None

_TAG_NONE = 0
_TAG_VALUE = 1
_TAG_MEMREF_INLINE = 2
_TAG_MEMREF_REGION = 3


@dataclass
class ParamSet:
    slots: list = field(default_factory=lambda: [None, None, None, None])

    def __post_init__(self):
        if len(self.slots) != 4:
            raise EncodeError("ParamSet must have exactly 4 slots")


def _encode_params(out: bytearray, ps: ParamSet) -> None:
    for p in ps.slots:
        if p is None:
            out.append(_TAG_NONE)
        elif isinstance(p, ValueParam):
            out.append(_TAG_VALUE)
            out.append(int(p.direction))
            out += struct.pack("<II", p.a & 0xFFFFFFFF, p.b & 0xFFFFFFFF)
        elif isinstance(p, MemRefParam):
            if p.region_id is not None:
                out.append(_TAG_MEMREF_REGION)
                out.append(int(p.direction))
                out += struct.pack("<III", p.region_id, p.offset, p.length)
            else:
                data = bytes(p.data)
                out.append(_TAG_MEMREF_INLINE)
                out.append(int(p.direction))
                out += struct.pack("<II", p.length, len(data))
                out += data
        else:
            raise EncodeError(f"unsupported param slot {p!r}")


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ProtocolError("payload shorter than its layout requires")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        n = self.u16()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"bad utf-8 in string field: {exc}") from None

    def blob16(self) -> bytes:
        return self.take(self.u16())

    def blob32(self) -> bytes:
        return self.take(self.u32())

    def uuid(self) -> UUID:
        return UUID(bytes=self.take(16))

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise ProtocolError(
                f"{len(self.buf) - self.pos} trailing bytes after payload"
            )


def _decode_params(r: _Reader) -> ParamSet:
    slots: list = []
    for _ in range(4):
        tag = r.u8()
        if tag == _TAG_NONE:
            slots.append(None)
        elif tag == _TAG_VALUE:
            d = _direction(r.u8())
            a, b = r.u32(), r.u32()
            slots.append(ValueParam(d, a, b))
        elif tag == _TAG_MEMREF_INLINE:
            d = _direction(r.u8())
            length = r.u32()
            data = r.blob32()
            slots.append(MemRefParam(d, data=data, length=length))
        elif tag == _TAG_MEMREF_REGION:
            d = _direction(r.u8())
            rid, off, length = r.u32(), r.u32(), r.u32()
            slots.append(MemRefParam(d, region_id=rid, offset=off, length=length))
        else:
            raise ProtocolError(f"unknown param tag {tag}")
    return ParamSet(slots)


def _direction(v: int) -> Direction:
    try:
        return Direction(v)
    except ValueError:
        raise ProtocolError(f"unknown param direction {v}") from None


def _pack_str(out: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise EncodeError("string field too long")
    out += struct.pack("<H", len(raw))
    out += raw


def _pack_blob16(out: bytearray, b: bytes) -> None:
    if len(b) > 0xFFFF:
        raise EncodeError("blob16 field too long")
    out += struct.pack("<H", len(b))
    out += b


def _pack_blob32(out: bytearray, b: bytes) -> None:
    out += struct.pack("<I", len(b))
    out += b


# ---------------------------------------------------------------------------
# Message bodies


@dataclass
class OpenSessionRequest:
    ta_uuid: UUID
    params: ParamSet = field(default_factory=ParamSet)


@dataclass
class OpenSessionResponse:
    return_code: int
    return_origin: int
    params: ParamSet = field(default_factory=ParamSet)


@dataclass
class InvokeRequest:
    command_id: int
    params: ParamSet = field(default_factory=ParamSet)


@dataclass
class InvokeResponse:
    return_code: int
    return_origin: int
    params: ParamSet = field(default_factory=ParamSet)


@dataclass
class CloseSession:
    pass


@dataclass
class FinalizeContext:
    pass


@dataclass
class RegisterSharedMemory:
    size: int
    flags: int


@dataclass
class SharedMemoryGranted:
    """Reply to RegisterSharedMemory and Manager->TA region grant.  On a
    refused registration return_code is nonzero and region_id is 0."""

    region_id: int
    attach_token: str
    return_code: int = 0


@dataclass
class ReleaseSharedMemory:
    region_id: int


@dataclass
class LaunchTA:
    """Manager->Launcher only; the nonce authenticates the clone's
    fresh connection back to the Manager."""

    ta_uuid: UUID
    module_path: str
    nonce: int


@dataclass
class TAReady:
    process_handle: int
    nonce: int


@dataclass
class LaunchFailed:
    nonce: int
    reason: str


@dataclass
class PeerDead:
    session_id: int


@dataclass
class ControlStatus:
    pass


@dataclass
class ControlStatusReply:
    state: int
    ta_count: int
    session_count: int = 0
    region_count: int = 0


@dataclass
class Shutdown:
    pass


@dataclass
class StoragePut:
    object_id: bytes
    flags: int
    data: bytes


@dataclass
class StorageGet:
    object_id: bytes


@dataclass
class StorageDelete:
    object_id: bytes


@dataclass
class StorageReply:
    return_code: int
    flags: int = 0
    data: bytes = b""


@dataclass
class Rescan:
    pass


@dataclass
class ListTAs:
    pass


@dataclass
class TAListEntry:
    uuid: UUID
    state: int
    pid: int
    module_path: str


@dataclass
class TAListReply:
    entries: list


_BODY_TYPES = {
    MsgType.OPEN_SESSION_REQUEST: OpenSessionRequest,
    MsgType.OPEN_SESSION_RESPONSE: OpenSessionResponse,
    MsgType.INVOKE_REQUEST: InvokeRequest,
    MsgType.INVOKE_RESPONSE: InvokeResponse,
    MsgType.CLOSE_SESSION: CloseSession,
    MsgType.FINALIZE_CONTEXT: FinalizeContext,
    MsgType.REGISTER_SHARED_MEMORY: RegisterSharedMemory,
    MsgType.SHARED_MEMORY_GRANTED: SharedMemoryGranted,
    MsgType.RELEASE_SHARED_MEMORY: ReleaseSharedMemory,
    MsgType.LAUNCH_TA: LaunchTA,
    MsgType.TA_READY: TAReady,
    MsgType.LAUNCH_FAILED: LaunchFailed,
    MsgType.PEER_DEAD: PeerDead,
    MsgType.CONTROL_STATUS: ControlStatus,
    MsgType.CONTROL_STATUS_REPLY: ControlStatusReply,
    MsgType.SHUTDOWN: Shutdown,
    MsgType.STORAGE_PUT: StoragePut,
    MsgType.STORAGE_GET: StorageGet,
    MsgType.STORAGE_DELETE: StorageDelete,
    MsgType.STORAGE_REPLY: StorageReply,
    MsgType.RESCAN: Rescan,
    MsgType.LIST_TAS: ListTAs,
    MsgType.TA_LIST_REPLY: TAListReply,
}

_TYPE_OF_BODY = {cls: t for t, cls in _BODY_TYPES.items()}


def msg_type_of(body) -> MsgType:
    try:
        return _TYPE_OF_BODY[type(body)]
    except KeyError:
        raise EncodeError(f"not a message body: {body!r}") from None


@dataclass
class Message:
    body: object
    flags: int = 0
    sender_id: int = 0
    session_id: int = 0
    message_id: int = 0

    @property
    def msg_type(self) -> MsgType:
        return msg_type_of(self.body)


def _encode_body(body) -> bytes:
    out = bytearray()
    if isinstance(body, OpenSessionRequest):
        out += body.ta_uuid.bytes
        _encode_params(out, body.params)
    elif isinstance(body, (OpenSessionResponse, InvokeResponse)):
        out += struct.pack("<IB", body.return_code & 0xFFFFFFFF, body.return_origin)
        _encode_params(out, body.params)
    elif isinstance(body, InvokeRequest):
        out += struct.pack("<I", body.command_id & 0xFFFFFFFF)
        _encode_params(out, body.params)
    elif isinstance(body, (CloseSession, FinalizeContext, ControlStatus, Shutdown,
                           Rescan, ListTAs)):
        pass
    elif isinstance(body, RegisterSharedMemory):
        out += struct.pack("<IB", body.size, body.flags)
    elif isinstance(body, SharedMemoryGranted):
        out += struct.pack("<II", body.return_code & 0xFFFFFFFF, body.region_id)
        _pack_str(out, body.attach_token)
    elif isinstance(body, ReleaseSharedMemory):
        out += struct.pack("<I", body.region_id)
    elif isinstance(body, LaunchTA):
        out += body.ta_uuid.bytes
        _pack_str(out, body.module_path)
        out += struct.pack("<I", body.nonce)
    elif isinstance(body, TAReady):
        out += struct.pack("<II", body.process_handle, body.nonce)
    elif isinstance(body, LaunchFailed):
        out += struct.pack("<I", body.nonce)
        _pack_str(out, body.reason)
    elif isinstance(body, PeerDead):
        out += struct.pack("<I", body.session_id)
    elif isinstance(body, ControlStatusReply):
        out += struct.pack("<BIII", body.state, body.ta_count,
                           body.session_count, body.region_count)
    elif isinstance(body, StoragePut):
        _pack_blob16(out, body.object_id)
        out.append(body.flags)
        _pack_blob32(out, body.data)
    elif isinstance(body, (StorageGet, StorageDelete)):
        _pack_blob16(out, body.object_id)
    elif isinstance(body, StorageReply):
        out += struct.pack("<IB", body.return_code & 0xFFFFFFFF, body.flags)
        _pack_blob32(out, body.data)
    elif isinstance(body, TAListReply):
        out += struct.pack("<H", len(body.entries))
        for e in body.entries:
            out += e.uuid.bytes
            out += struct.pack("<BI", e.state, e.pid)
            _pack_str(out, e.module_path)
    else:
        raise EncodeError(f"not a message body: {body!r}")
    return bytes(out)


def _decode_body(msg_type: MsgType, payload: bytes):
    r = _Reader(payload)
    if msg_type == MsgType.OPEN_SESSION_REQUEST:
        body = OpenSessionRequest(r.uuid(), _decode_params(r))
    elif msg_type in (MsgType.OPEN_SESSION_RESPONSE, MsgType.INVOKE_RESPONSE):
        code, origin = r.u32(), r.u8()
        cls = _BODY_TYPES[msg_type]
        body = cls(code, origin, _decode_params(r))
    elif msg_type == MsgType.INVOKE_REQUEST:
        body = InvokeRequest(r.u32(), _decode_params(r))
    elif msg_type in (MsgType.CLOSE_SESSION, MsgType.FINALIZE_CONTEXT,
                      MsgType.CONTROL_STATUS, MsgType.SHUTDOWN,
                      MsgType.RESCAN, MsgType.LIST_TAS):
        body = _BODY_TYPES[msg_type]()
    elif msg_type == MsgType.REGISTER_SHARED_MEMORY:
        body = RegisterSharedMemory(r.u32(), r.u8())
    elif msg_type == MsgType.SHARED_MEMORY_GRANTED:
        code, rid = r.u32(), r.u32()
        body = SharedMemoryGranted(rid, r.string(), code)
    elif msg_type == MsgType.RELEASE_SHARED_MEMORY:
        body = ReleaseSharedMemory(r.u32())
    elif msg_type == MsgType.LAUNCH_TA:
        body = LaunchTA(r.uuid(), r.string(), r.u32())
    elif msg_type == MsgType.TA_READY:
        body = TAReady(r.u32(), r.u32())
    elif msg_type == MsgType.LAUNCH_FAILED:
        body = LaunchFailed(r.u32(), r.string())
    elif msg_type == MsgType.PEER_DEAD:
        body = PeerDead(r.u32())
    elif msg_type == MsgType.CONTROL_STATUS_REPLY:
        body = ControlStatusReply(r.u8(), r.u32(), r.u32(), r.u32())
    elif msg_type == MsgType.STORAGE_PUT:
        oid = r.blob16()
        flags = r.u8()
        body = StoragePut(oid, flags, r.blob32())
    elif msg_type in (MsgType.STORAGE_GET, MsgType.STORAGE_DELETE):
        body = _BODY_TYPES[msg_type](r.blob16())
    elif msg_type == MsgType.STORAGE_REPLY:
        code, flags = r.u32(), r.u8()
        body = StorageReply(code, flags, r.blob32())
    elif msg_type == MsgType.TA_LIST_REPLY:
        n = r.u16()
        entries = []
        for _ in range(n):
            u = r.uuid()
            state, pid = r.u8(), r.u32()
            entries.append(TAListEntry(u, state, pid, r.string()))
        body = TAListReply(entries)
    else:  # pragma: no cover - enum is exhaustive
        raise ProtocolError(f"unknown msg_type {msg_type}")
    r.done()
    return body


def encode(msg: Message) -> bytes:
    payload = _encode_body(msg.body)
    header = _HEADER.pack(
        MAGIC,
        WIRE_VERSION,
        int(msg.msg_type),
        msg.flags,
        msg.sender_id,
        msg.session_id,
        msg.message_id,
        len(payload),
    )
    return header + payload


def decode_header(buf: bytes, payload_cap: int = DEFAULT_PAYLOAD_CAP):
    """Validate a header and return (msg_type, flags, sender, session,
    message_id, payload_len).  Rejects bad magic/version and oversized
    payload declarations before any payload is read."""
    if len(buf) < HEADER_LEN:
        raise FramingError("short header")
    magic, version, mtype, flags, sender, session, mid, plen = _HEADER.unpack(
        buf[:HEADER_LEN]
    )
    if magic != MAGIC:
        raise ProtocolError("bad magic")
    if version != WIRE_VERSION:
        raise ProtocolError(f"unsupported wire version {version}")
    if plen > payload_cap:
        raise ProtocolError(f"payload_len {plen} exceeds cap {payload_cap}")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise ProtocolError(f"unknown msg_type {mtype}") from None
    return mtype, flags, sender, session, mid, plen


def decode(buf: bytes, payload_cap: int = DEFAULT_PAYLOAD_CAP) -> Message:
    mtype, flags, sender, session, mid, plen = decode_header(buf, payload_cap)
    if len(buf) != HEADER_LEN + plen:
        raise FramingError(
            f"frame is {len(buf)} bytes, header promised {HEADER_LEN + plen}"
        )
    body = _decode_body(mtype, buf[HEADER_LEN:])
    return Message(body, flags=flags, sender_id=sender, session_id=session,
                   message_id=mid)


# ---------------------------------------------------------------------------
# Stream framing


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = bytearray()
    while len(chunks) < n:
        try:
            chunk = sock.recv(n - len(chunks))
        except (ConnectionResetError, BrokenPipeError, OSError) as exc:
            raise ConnectionClosed(str(exc)) from None
        if not chunk:
            raise ConnectionClosed("peer closed the connection")
        chunks += chunk
    return bytes(chunks)


def read_frame(sock: socket.socket, payload_cap: int = DEFAULT_PAYLOAD_CAP) -> bytes:
    """Block until one full frame (header + payload) is read; returns its
    raw bytes."""
    header = _recv_exact(sock, HEADER_LEN)
    *_, plen = decode_header(header, payload_cap)
    payload = _recv_exact(sock, plen) if plen else b""
    return header + payload


def write_frame(sock: socket.socket, frame: bytes) -> None:
    try:
        sock.sendall(frame)
    except (ConnectionResetError, BrokenPipeError, OSError) as exc:
        raise ConnectionClosed(str(exc)) from None


def send_message(sock: socket.socket, msg: Message) -> None:
    write_frame(sock, encode(msg))


def recv_message(sock: socket.socket,
                 payload_cap: int = DEFAULT_PAYLOAD_CAP) -> Message:
    return decode(read_frame(sock, payload_cap), payload_cap)


class FrameAssembler:
    """Incremental frame extraction for non-blocking readers.

    Feed raw bytes as they arrive; pop complete frames.  Raises
    ProtocolError as soon as a header is invalid so callers can drop the
    connection without reading further.
    """

    def __init__(self, payload_cap: int = DEFAULT_PAYLOAD_CAP):
        self._buf = bytearray()
        self._cap = payload_cap

    def feed(self, data: bytes) -> list[bytes]:
        self._buf += data
        frames = []
        while True:
            if len(self._buf) < HEADER_LEN:
                break
            *_, plen = decode_header(bytes(self._buf[:HEADER_LEN]), self._cap)
            total = HEADER_LEN + plen
            if len(self._buf) < total:
                break
            frames.append(bytes(self._buf[:total]))
            del self._buf[:total]
        return frames
