"""TA process runtime: event loop, entry-point dispatch, core services.

Each TA process runs exactly two contexts: an IO thread that reads
frames from the Manager connection and a logic thread (the main thread)
that calls TA entry points strictly serially.  Control messages such as
Shutdown take effect between commands without halting a queue drain.
"""

from __future__ import annotations

import itertools
import logging
import queue
import threading

from .. import codes, shm, wire
from ..codes import TeeError
from . import crypto, surface

log = logging.getLogger("virtee.ta.runtime")

ALLOC_OVERHEAD = 32
RPC_TIMEOUT = 10.0


class MemoryBudget:
    """Heap accounting against the TA's dataSize property."""

    def __init__(self, limit: int):
        self.limit = limit
        self.in_use = 0

    def take(self, size: int) -> None:
        charged = size + ALLOC_OVERHEAD
        if self.in_use + charged > self.limit:
            raise TeeError(
                codes.ERROR_OUT_OF_MEMORY,
                f"allocation of {size} exceeds dataSize budget "
                f"({self.in_use}/{self.limit} in use)",
            )
        self.in_use += charged

    def give(self, size: int) -> None:
        self.in_use -= size + ALLOC_OVERHEAD
        if self.in_use < 0:
            raise AssertionError("memory budget accounting went negative")


class AllocatedBlock:
    def __init__(self, size: int):
        self.size = size
        self.buffer = bytearray(size)
        self.freed = False


class ObjectHandle:
    """Open persistent object with a seek position.

    Data is cached TA-side; every write persists the whole object back
    through the Manager.
    """

    def __init__(self, api: "TAInstanceApi", object_id: bytes, flags: int,
                 data: bytes):
        self._api = api
        self.object_id = bytes(object_id)
        self.flags = flags
        self.data = bytearray(data)
        self.pos = 0
        self.closed = False

    def _check_open(self):
        if self.closed:
            raise TeeError(codes.ERROR_BAD_STATE, "object handle is closed")

    def read(self, n: int) -> bytes:
        self._check_open()
        if n < 0:
            raise TeeError(codes.ERROR_BAD_PARAMETERS, "negative read length")
        out = bytes(self.data[self.pos : self.pos + n])
        self.pos += len(out)
        return out

    def write(self, data: bytes) -> None:
        self._check_open()
        data = bytes(data)
        end = self.pos + len(data)
        if end > len(self.data):
            self.data.extend(b"\x00" * (end - len(self.data)))
        self.data[self.pos : end] = data
        self.pos = end
        self._api._storage_put(
            self.object_id,
            self.flags | wire.STORAGE_OVERWRITE,
            bytes(self.data),
        )

    def seek(self, pos: int, whence: int = 0) -> int:
        self._check_open()
        base = {0: 0, 1: self.pos, 2: len(self.data)}.get(whence)
        if base is None:
            raise TeeError(codes.ERROR_BAD_PARAMETERS, f"bad whence {whence}")
        new = base + pos
        if new < 0:
            raise TeeError(codes.ERROR_BAD_PARAMETERS, "seek before start")
        self.pos = new
        return self.pos

    def close(self) -> None:
        self.closed = True

    def delete(self) -> None:
        self._check_open()
        self._api._storage_delete(self.object_id)
        self.closed = True


class TASession:
    """Per-session context handed to TA entry points; ``ctx`` is free for
    TA use."""

    def __init__(self, session_id: int):
        self.session_id = session_id
        self.ctx = None


class TAInstanceApi:
    """The core-services handle passed to every TA entry point."""

    crypto = crypto

    def __init__(self, runtime: "TARuntime"):
        self._rt = runtime
        props = runtime.props
        self.uuid = props.uuid
        self.properties = props
        self.budget = MemoryBudget(props.data_size)
        self._blocks: set[int] = set()

    # -- memory -----------------------------------------------------------
    def alloc(self, size: int) -> AllocatedBlock:
        if not isinstance(size, int) or size <= 0:
            raise TeeError(codes.ERROR_BAD_PARAMETERS, "size must be positive")
        self.budget.take(size)
        block = AllocatedBlock(size)
        self._blocks.add(id(block))
        return block

    def free(self, block: AllocatedBlock) -> None:
        if block.freed or id(block) not in self._blocks:
            raise TeeError(codes.ERROR_BAD_PARAMETERS, "not an allocated block")
        block.freed = True
        self._blocks.discard(id(block))
        self.budget.give(block.size)

    # -- properties -------------------------------------------------------
    def get_property_u32(self, name: str) -> int:
        table = {
            "gpd.ta.dataSize": self.properties.data_size,
            "gpd.ta.stackSize": self.properties.stack_size,
        }
        try:
            return table[name]
        except KeyError:
            raise TeeError(codes.ERROR_ITEM_NOT_FOUND, name) from None

    # -- misc -------------------------------------------------------------
    def random_bytes(self, n: int) -> bytes:
        return crypto.random_bytes(n)

    def log(self, fmt: str, *args) -> None:
        log.info("[ta %s] %s", self.uuid, fmt % args if args else fmt)

    def not_supported(self, api_name: str) -> int:
        return surface.declare_unimplemented(api_name)

    # -- trusted storage --------------------------------------------------
    def _storage_rpc(self, body) -> wire.StorageReply:
        reply = self._rt.rpc(body)
        if not isinstance(reply.body, wire.StorageReply):
            raise TeeError(codes.ERROR_COMMUNICATION, "unexpected storage reply")
        return reply.body

    def _storage_put(self, object_id: bytes, flags: int, data: bytes) -> None:
        rep = self._storage_rpc(wire.StoragePut(bytes(object_id), flags, bytes(data)))
        if rep.return_code != codes.SUCCESS:
            raise TeeError(rep.return_code, "storage put failed")

    def _storage_delete(self, object_id: bytes) -> None:
        rep = self._storage_rpc(wire.StorageDelete(bytes(object_id)))
        if rep.return_code != codes.SUCCESS:
            raise TeeError(rep.return_code, "storage delete failed")

    def storage_create(self, object_id: bytes, flags: int = 0,
                       data: bytes = b"") -> ObjectHandle:
        self._storage_put(object_id, flags, data)
        return ObjectHandle(self, object_id, flags, data)

    def storage_open(self, object_id: bytes) -> ObjectHandle:
        rep = self._storage_rpc(wire.StorageGet(bytes(object_id)))
        if rep.return_code != codes.SUCCESS:
            raise TeeError(rep.return_code, "storage open failed")
        return ObjectHandle(self, object_id, rep.flags, rep.data)

    def storage_read(self, handle: ObjectHandle, n: int) -> bytes:
        return handle.read(n)

    def storage_write(self, handle: ObjectHandle, data: bytes) -> None:
        handle.write(data)

    def storage_seek(self, handle: ObjectHandle, pos: int, whence: int = 0) -> int:
        return handle.seek(pos, whence)

    def storage_close(self, handle: ObjectHandle) -> None:
        handle.close()

    def storage_delete(self, handle: ObjectHandle) -> None:
        handle.delete()


def _entry_result(rc) -> int:
    if rc is None:
        return codes.SUCCESS
    if isinstance(rc, int):
        return rc
    raise TypeError(f"TA entry point returned {rc!r}, expected an int code")


class TARuntime:
    def __init__(self, module, props, sock,
                 payload_cap: int = wire.DEFAULT_PAYLOAD_CAP):
        self.module = module
        self.props = props
        self.sock = sock
        self.payload_cap = payload_cap
        self.api = TAInstanceApi(self)
        self.sessions: dict[int, TASession] = {}
        self.queue: queue.Queue = queue.Queue()
        self.shutdown_requested = threading.Event()
        self._pending: dict[int, queue.Queue] = {}
        self._pending_lock = threading.Lock()
        self._msg_ids = itertools.count(1)
        self._region_tokens: dict[int, str] = {}
        self._attached: dict[int, shm.AttachedRegion] = {}

    # -- IO context -------------------------------------------------------
    def _io_loop(self) -> None:
        while True:
            try:
                msg = wire.recv_message(self.sock, self.payload_cap)
            except wire.ConnectionClosed:
                self.queue.put(None)
                return
            except wire.WireError as exc:
                log.error("protocol error from manager: %s", exc)
                self.queue.put(None)
                return
            if isinstance(msg.body, wire.StorageReply):
                with self._pending_lock:
                    waiter = self._pending.pop(msg.message_id, None)
                if waiter is not None:
                    waiter.put(msg)
                continue
            if isinstance(msg.body, wire.Shutdown):
                # Status change is visible to logic immediately, without
                # waiting for the queue to drain.
                self.shutdown_requested.set()
            self.queue.put(msg)

    def rpc(self, body) -> wire.Message:
        """Blocking request/response toward the Manager (logic context)."""
        mid = next(self._msg_ids)
        waiter: queue.Queue = queue.Queue()
        with self._pending_lock:
            self._pending[mid] = waiter
        wire.send_message(self.sock, wire.Message(body, message_id=mid))
        try:
            return waiter.get(timeout=RPC_TIMEOUT)
        except queue.Empty:
            with self._pending_lock:
                self._pending.pop(mid, None)
            raise TeeError(codes.ERROR_COMMUNICATION, "manager did not answer")

    # -- parameter materialization ---------------------------------------
    def _attach_region(self, region_id: int) -> shm.AttachedRegion:
        if region_id in self._attached:
            return self._attached[region_id]
        token = self._region_tokens.get(region_id)
        if token is None:
            raise TeeError(codes.ERROR_BAD_PARAMETERS,
                           f"region {region_id} was never granted")
        import os

        region = shm.AttachedRegion(token, os.stat(token).st_size)
        self._attached[region_id] = region
        return region

    def _materialize(self, params: wire.ParamSet) -> wire.ParamSet:
        for p in params.slots:
            if isinstance(p, wire.MemRefParam) and p.region_id is not None:
                region = self._attach_region(p.region_id)
                if p.offset + p.length > region.size:
                    raise TeeError(codes.ERROR_BAD_PARAMETERS,
                                   "memref beyond region bounds")
                p.buffer = region.buffer[p.offset : p.offset + p.length]
        return params

    @staticmethod
    def _response_params(params: wire.ParamSet) -> wire.ParamSet:
        slots: list = []
        for p in params.slots:
            if isinstance(p, wire.ValueParam):
                slots.append(wire.ValueParam(p.direction, p.a, p.b))
            elif isinstance(p, wire.MemRefParam):
                if p.region_id is not None:
                    slots.append(wire.MemRefParam(
                        p.direction, region_id=p.region_id,
                        offset=p.offset, length=p.length))
                else:
                    data = bytes(p.data) if p.direction != wire.Direction.IN else b""
                    slots.append(wire.MemRefParam(p.direction, data=data,
                                                  length=p.length))
            else:
                slots.append(None)
        return wire.ParamSet(slots)

    # -- logic context ----------------------------------------------------
    def _call(self, fn, *args) -> int:
        try:
            return _entry_result(fn(*args))
        except TeeError as exc:
            return exc.code

    def _reply(self, req: wire.Message, body) -> None:
        try:
            wire.send_message(self.sock, wire.Message(
                body, session_id=req.session_id, message_id=req.message_id))
        except wire.ConnectionClosed:
            pass

    def _serve(self, msg: wire.Message) -> None:
        body = msg.body
        if isinstance(body, wire.SharedMemoryGranted):
            self._region_tokens[body.region_id] = body.attach_token
        elif isinstance(body, wire.OpenSessionRequest):
            session = TASession(msg.session_id)
            try:
                params = self._materialize(body.params)
            except TeeError as exc:
                self._reply(msg, wire.OpenSessionResponse(
                    exc.code, codes.Origin.TEE))
                return
            rc = self._call(self.module.ta_open_session, self.api, session, params)
            if rc == codes.SUCCESS:
                self.sessions[msg.session_id] = session
            self._reply(msg, wire.OpenSessionResponse(
                rc, codes.Origin.TRUSTED_APP, self._response_params(params)))
        elif isinstance(body, wire.InvokeRequest):
            session = self.sessions.get(msg.session_id)
            if session is None:
                self._reply(msg, wire.InvokeResponse(
                    codes.ERROR_BAD_PARAMETERS, codes.Origin.TEE))
                return
            try:
                params = self._materialize(body.params)
            except TeeError as exc:
                self._reply(msg, wire.InvokeResponse(exc.code, codes.Origin.TEE))
                return
            rc = self._call(self.module.ta_invoke_command, self.api, session,
                            body.command_id, params)
            self._reply(msg, wire.InvokeResponse(
                rc, codes.Origin.TRUSTED_APP, self._response_params(params)))
        elif isinstance(body, wire.CloseSession):
            session = self.sessions.pop(msg.session_id, None)
            if session is not None:
                self._call(self.module.ta_close_session, self.api, session)
        elif isinstance(body, wire.PeerDead):
            session = self.sessions.pop(body.session_id, None)
            if session is not None:
                self._call(self.module.ta_close_session, self.api, session)
        elif isinstance(body, wire.Shutdown):
            pass  # handled via shutdown_requested
        else:
            log.warning("unexpected message in TA process: %s", msg.msg_type.name)

    def _drain_on_shutdown(self) -> None:
        while True:
            try:
                msg = self.queue.get_nowait()
            except queue.Empty:
                return
            if msg is None:
                return
            if isinstance(msg.body, wire.OpenSessionRequest):
                self._reply(msg, wire.OpenSessionResponse(
                    codes.ERROR_TARGET_DEAD, codes.Origin.COMMS))
            elif isinstance(msg.body, wire.InvokeRequest):
                self._reply(msg, wire.InvokeResponse(
                    codes.ERROR_TARGET_DEAD, codes.Origin.COMMS))

    def run(self) -> int:
        """Serve until shutdown or manager hangup; returns exit status."""
        io = threading.Thread(target=self._io_loop, name="ta-io", daemon=True)
        io.start()
        try:
            self.module.ta_create(self.api)
        except TeeError as exc:
            log.error("ta_create failed: %s", exc)
            return 1
        while True:
            if self.shutdown_requested.is_set():
                break
            try:
                msg = self.queue.get(timeout=0.2)
            except queue.Empty:
                continue
            if msg is None:
                log.info("manager connection closed; exiting")
                return 0
            self._serve(msg)
        self._drain_on_shutdown()
        for sid in list(self.sessions):
            session = self.sessions.pop(sid)
            self._call(self.module.ta_close_session, self.api, session)
        self._call(self.module.ta_destroy, self.api)
        for region in self._attached.values():
            region.close()
        return 0
