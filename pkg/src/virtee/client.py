"""Client-side library for talking to the framework.

A Context is one connection to the Manager's control socket.  Sessions,
commands, and shared memory follow the classic client-API shape:
four-slot parameter sets, return code plus return origin on every
operation, explicit finalize.  Failures raise ClientError carrying the
code, the origin, and the (possibly updated) parameters, so callers can
recover out-of-band results such as the required length after a
short-buffer error.
"""

from __future__ import annotations

import logging
import os
import socket
import threading
from pathlib import Path
from uuid import UUID

from . import codes, shm, wire
from .config import FrameworkConfig

log = logging.getLogger("virtee.client")

CONNECT_TIMEOUT = 2.0

Direction = wire.Direction


class ClientError(Exception):
    def __init__(self, code: int, origin: int, message: str = "",
                 params: wire.ParamSet | None = None):
        self.code = code
        self.origin = codes.Origin(origin)
        self.params = params
        detail = message or codes.code_name(code)
        super().__init__(f"{detail} (code {code:#010x}, origin {self.origin.name})")


def value(a: int = 0, b: int = 0,
          direction: Direction = Direction.INOUT) -> wire.ValueParam:
    return wire.ValueParam(direction, a, b)


def tmpref(data: bytes = b"", direction: Direction = Direction.INOUT,
           length: int | None = None) -> wire.MemRefParam:
    """Inline memory reference; the payload travels in the message."""
    data = bytes(data)
    return wire.MemRefParam(direction, data=data,
                            length=len(data) if length is None else length)


def memref(memory: "SharedMemory", offset: int = 0,
           length: int | None = None,
           direction: Direction = Direction.INOUT) -> wire.MemRefParam:
    """Reference into a shared-memory region owned by this context."""
    if length is None:
        length = memory.size - offset
    return wire.MemRefParam(direction, region_id=memory.region_id,
                            offset=offset, length=length)


class SharedMemory:
    """A Manager-backed shared region attached into this process.

    ``registered`` wraps a caller-owned buffer: its contents are copied
    into the region before each command and back out afterwards, so the
    caller keeps working with its own bytearray.
    """

    def __init__(self, context: "Context", region_id: int, token: str,
                 size: int, flags: int, backing: bytearray | None = None):
        self._context = context
        self.region_id = region_id
        self.size = size
        self.flags = flags
        self.backing = backing
        self._region = shm.AttachedRegion(token, size)
        self.released = False

    @property
    def buffer(self) -> memoryview:
        if self.released:
            raise ClientError(codes.ERROR_BAD_STATE, codes.Origin.API,
                              "shared memory released")
        return self._region.buffer

    def _sync_in(self) -> None:
        if self.backing is not None:
            self._region.buffer[: len(self.backing)] = self.backing

    def _sync_out(self) -> None:
        if self.backing is not None:
            self.backing[:] = self._region.buffer[: len(self.backing)]

    def release(self) -> None:
        if self.released:
            return
        self.released = True
        self._region.close()
        self._context._release_region(self)


class Session:
    def __init__(self, context: "Context", session_id: int):
        self._context = context
        self.session_id = session_id
        self.closed = False

    def invoke_command(self, command_id: int,
                       params: list | None = None) -> wire.ParamSet:
        if self.closed:
            raise ClientError(codes.ERROR_BAD_STATE, codes.Origin.API,
                              "session is closed")
        return self._context._invoke(self, command_id, params)

    def request_cancellation(self) -> int:
        log.info("cancellation is not supported; request ignored")
        return codes.ERROR_NOT_SUPPORTED

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        self._context._close_session(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _param_set(params: list | None) -> wire.ParamSet:
    slots = list(params or [])
    if len(slots) > 4:
        raise ClientError(codes.ERROR_BAD_PARAMETERS, codes.Origin.API,
                          "at most four parameters")
    slots += [None] * (4 - len(slots))
    return wire.ParamSet(slots)


class Context:
    """One live connection to the framework; thread-safe via one lock."""

    def __init__(self, sock: socket.socket, path: Path):
        self._sock = sock
        self._path = path
        self._lock = threading.RLock()
        self._msg_ids = iter(range(1, 1 << 32))
        self._regions: dict[int, SharedMemory] = {}
        self.finalized = False

    # -- transport --------------------------------------------------------
    def _roundtrip(self, body, session_id: int = 0) -> wire.Message:
        with self._lock:
            if self.finalized:
                raise ClientError(codes.ERROR_BAD_STATE, codes.Origin.API,
                                  "context is finalized")
            mid = next(self._msg_ids)
            try:
                wire.send_message(self._sock, wire.Message(
                    body, session_id=session_id, message_id=mid))
                while True:
                    reply = wire.recv_message(self._sock)
                    if reply.message_id == mid:
                        return reply
                    log.warning("out-of-order reply %d dropped", reply.message_id)
            except (wire.WireError, OSError) as exc:
                raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                                  f"framework connection lost: {exc}") from exc

    # -- sessions ---------------------------------------------------------
    def open_session(self, ta_uuid: UUID | str,
                     params: list | None = None) -> Session:
        if isinstance(ta_uuid, str):
            ta_uuid = UUID(ta_uuid)
        pset = self._prepare(params)
        reply = self._roundtrip(wire.OpenSessionRequest(ta_uuid, pset))
        body = reply.body
        if not isinstance(body, wire.OpenSessionResponse):
            raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                              "unexpected reply to open-session")
        merged = self._merge_out(params, body.params)
        if body.return_code != codes.SUCCESS:
            raise ClientError(body.return_code, body.return_origin,
                              "open session failed", merged)
        return Session(self, reply.session_id)

    def _invoke(self, session: Session, command_id: int,
                params: list | None) -> wire.ParamSet:
        pset = self._prepare(params)
        reply = self._roundtrip(wire.InvokeRequest(command_id, pset),
                                session_id=session.session_id)
        body = reply.body
        if not isinstance(body, wire.InvokeResponse):
            raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                              "unexpected reply to invoke")
        merged = self._merge_out(params, body.params)
        if body.return_code != codes.SUCCESS:
            raise ClientError(body.return_code, body.return_origin,
                              f"command {command_id:#x} failed", merged)
        return merged

    def _close_session(self, session: Session) -> None:
        try:
            self._roundtrip(wire.CloseSession(), session_id=session.session_id)
        except ClientError as exc:
            log.warning("close session %d: %s", session.session_id, exc)

    # -- parameter marshalling -------------------------------------------
    def _prepare(self, params: list | None) -> wire.ParamSet:
        pset = _param_set(params)
        for p in pset.slots:
            if isinstance(p, wire.MemRefParam) and p.region_id is not None:
                memory = self._regions.get(p.region_id)
                if memory is None or memory.released:
                    raise ClientError(codes.ERROR_BAD_PARAMETERS,
                                      codes.Origin.API,
                                      "parameter references released memory")
                memory._sync_in()
        return pset

    def _merge_out(self, params: list | None,
                   response: wire.ParamSet) -> wire.ParamSet:
        synced = set()
        originals = list(params or [])
        for i, rp in enumerate(response.slots):
            orig = originals[i] if i < len(originals) else None
            if isinstance(rp, wire.ValueParam) and isinstance(orig, wire.ValueParam):
                if orig.direction != Direction.IN:
                    orig.a, orig.b = rp.a, rp.b
            elif isinstance(rp, wire.MemRefParam) and isinstance(orig, wire.MemRefParam):
                orig.length = rp.length
                if orig.region_id is None and orig.direction != Direction.IN:
                    orig.data = rp.data
                if orig.region_id is not None and orig.region_id not in synced:
                    memory = self._regions.get(orig.region_id)
                    if memory is not None and not memory.released:
                        memory._sync_out()
                    synced.add(orig.region_id)
        return response

    # -- shared memory ----------------------------------------------------
    def _new_region(self, size: int, flags: int,
                    backing: bytearray | None) -> SharedMemory:
        reply = self._roundtrip(wire.RegisterSharedMemory(size, flags))
        body = reply.body
        if not isinstance(body, wire.SharedMemoryGranted):
            raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                              "unexpected reply to memory registration")
        if body.return_code != codes.SUCCESS:
            raise ClientError(body.return_code, codes.Origin.TEE,
                              "shared memory refused")
        memory = SharedMemory(self, body.region_id, body.attach_token,
                              size, flags, backing)
        self._regions[body.region_id] = memory
        return memory

    def allocate_shared_memory(self, size: int,
                               flags: int = wire.SHM_INPUT | wire.SHM_OUTPUT
                               ) -> SharedMemory:
        return self._new_region(size, flags, backing=None)

    def register_shared_memory(self, buffer: bytearray,
                               flags: int = wire.SHM_INPUT | wire.SHM_OUTPUT
                               ) -> SharedMemory:
        if not isinstance(buffer, bytearray) or len(buffer) == 0:
            raise ClientError(codes.ERROR_BAD_PARAMETERS, codes.Origin.API,
                              "register needs a non-empty bytearray")
        memory = self._new_region(len(buffer), flags, backing=buffer)
        memory._sync_in()
        return memory

    def _release_region(self, memory: SharedMemory) -> None:
        self._regions.pop(memory.region_id, None)
        if self.finalized:
            return
        try:
            with self._lock:
                wire.send_message(self._sock, wire.Message(
                    wire.ReleaseSharedMemory(memory.region_id)))
        except (wire.WireError, OSError):
            pass

    # -- control plane ----------------------------------------------------
    def status(self) -> wire.ControlStatusReply:
        reply = self._roundtrip(wire.ControlStatus())
        if not isinstance(reply.body, wire.ControlStatusReply):
            raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                              "unexpected status reply")
        return reply.body

    def list_tas(self) -> list[wire.TAListEntry]:
        reply = self._roundtrip(wire.ListTAs())
        if not isinstance(reply.body, wire.TAListReply):
            raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                              "unexpected TA list reply")
        return reply.body.entries

    def rescan(self) -> wire.ControlStatusReply:
        reply = self._roundtrip(wire.Rescan())
        if not isinstance(reply.body, wire.ControlStatusReply):
            raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                              "unexpected rescan reply")
        return reply.body

    # -- lifecycle --------------------------------------------------------
    def finalize(self) -> None:
        if self.finalized:
            return
        for memory in list(self._regions.values()):
            memory.release()
        try:
            self._roundtrip(wire.FinalizeContext())
        except ClientError:
            pass
        self.finalized = True
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.finalize()


def default_socket(config: FrameworkConfig | None = None) -> Path:
    env = os.environ.get("VIRTEE_SOCKET")
    if env:
        return Path(env)
    if config is not None:
        return config.control_socket
    return FrameworkConfig().control_socket


def initialize_context(socket_path: str | os.PathLike | None = None,
                       timeout: float = CONNECT_TIMEOUT) -> Context:
    """Connect to the framework and verify it answers, both within
    ``timeout``; raises ClientError otherwise."""
    path = Path(socket_path) if socket_path is not None else default_socket()
    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    sock.settimeout(timeout)
    try:
        sock.connect(str(path))
    except OSError as exc:
        sock.close()
        raise ClientError(codes.ERROR_COMMUNICATION, codes.Origin.COMMS,
                          f"cannot reach framework at {path}: {exc}") from exc
    ctx = Context(sock, path)
    try:
        status = ctx.status()
    except ClientError:
        sock.close()
        raise
    if status.state != 1:
        sock.close()
        raise ClientError(codes.ERROR_BAD_STATE, codes.Origin.TEE,
                          f"framework not ready (state {status.state})")
    sock.settimeout(None)
    return ctx
