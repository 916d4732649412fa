"""The framework's "operating system".

The Manager accepts CA connections, routes sessions and commands to TA
processes, owns the shared-memory registry and secure storage, and
releases every shared resource when a peer dies.

Two cooperating contexts: an IO thread owning all sockets (accept +
read) and the logic thread (main) owning all registries.  They exchange
work over an internal queue; the logic thread is the single writer on
every connection.
"""

from __future__ import annotations

import itertools
import logging
import os
import queue
import selectors
import signal
import socket
import threading
import time

from . import codes, shm, wire
from .config import FrameworkConfig
from .discovery import DiscoveryError, TAMetadata, discover_tas
from .storage import SecureStorage

log = logging.getLogger("virtee.manager")

LAUNCH_TIMEOUT = 10.0
TICK = 0.2
STATE_READY = 1

_ID_LIMIT = 0xFFFFFFFF


class IdExhausted(Exception):
    """A 32-bit id counter wrapped; unreachable at desk scale."""


def _monotonic_ids():
    for i in itertools.count(1):
        if i > _ID_LIMIT:
            raise IdExhausted("32-bit id space exhausted")
        yield i


class Connection:
    _ids = itertools.count(1)

    def __init__(self, sock: socket.socket, kind: str, payload_cap: int):
        self.id = next(self._ids)
        self.sock = sock
        self.kind = kind  # 'ca' | 'ta' | 'launcher'
        self.assembler = wire.FrameAssembler(payload_cap)
        self.instance: TAInstance | None = None
        self.cleaned = False

    def send(self, msg: wire.Message) -> None:
        wire.send_message(self.sock, msg)


_STATE_EDGES = {
    "not_loaded": {"launching"},
    "launching": {"running", "dead"},
    "running": {"dead"},
    "dead": set(),
}

_WIRE_STATE = {
    "not_loaded": wire.TA_STATE_NOT_LOADED,
    "launching": wire.TA_STATE_LAUNCHING,
    "running": wire.TA_STATE_RUNNING,
    "dead": wire.TA_STATE_DEAD,
}


class TAInstance:
    _ids = itertools.count(1)

    def __init__(self, metadata: TAMetadata):
        self.id = next(self._ids)
        self.metadata = metadata
        self.uuid = metadata.uuid
        self.state = "not_loaded"
        self.transitions = ["not_loaded"]
        self.pid = 0
        self.conn: Connection | None = None
        self.sessions: set[int] = set()
        self.retiring = False

    def set_state(self, new: str) -> None:
        if new not in _STATE_EDGES[self.state]:
            raise AssertionError(f"illegal TA state edge {self.state} -> {new}")
        self.state = new
        self.transitions.append(new)


class Session:
    def __init__(self, session_id: int, ca_conn: Connection, instance: TAInstance):
        self.session_id = session_id
        self.ca_conn = ca_conn
        self.instance = instance
        self.state = "opening"  # opening | open | closing


class Region:
    def __init__(self, region_id: int, owner: Connection, size: int, flags: int,
                 token: str):
        self.region_id = region_id
        self.owner = owner
        self.size = size
        self.flags = flags
        self.token = token
        self.granted_to: set[int] = set()  # TAInstance ids


class PendingLaunch:
    def __init__(self, nonce: int, instance: TAInstance):
        self.nonce = nonce
        self.instance = instance
        self.deadline = time.monotonic() + LAUNCH_TIMEOUT
        self.waiters: list[tuple[Connection, wire.Message]] = []


class PendingCall:
    def __init__(self, kind: str, ca_conn: Connection, ca_msg_id: int,
                 session_id: int, instance: TAInstance):
        self.kind = kind  # 'open' | 'invoke'
        self.ca_conn = ca_conn
        self.ca_msg_id = ca_msg_id
        self.session_id = session_id
        self.instance = instance


class Manager:
    def __init__(self, config: FrameworkConfig, metadata: list[TAMetadata],
                 ca_listener: socket.socket, ta_listener: socket.socket,
                 launcher_sock: socket.socket):
        self.config = config
        self.metadata = {m.uuid: m for m in metadata}
        self.storage = SecureStorage(config.storage_root)
        self.ca_listener = ca_listener
        self.ta_listener = ta_listener
        self.launcher_conn = Connection(launcher_sock, "launcher",
                                        config.payload_cap)
        self.launcher_alive = True

        self.conns: dict[int, Connection] = {}
        self.instances: dict[int, TAInstance] = {}
        self.sessions: dict[int, Session] = {}
        self.dead_sessions: dict[int, Connection] = {}  # target-dead tombstones
        self.regions: dict[int, Region] = {}
        self.pending_launches: dict[int, PendingLaunch] = {}
        self.pending_calls: dict[int, PendingCall] = {}

        self._session_ids = _monotonic_ids()
        self._region_ids = _monotonic_ids()
        self._nonces = _monotonic_ids()
        self._msg_ids = _monotonic_ids()

        self.events: queue.Queue = queue.Queue()
        self.stop_requested = threading.Event()

    # ------------------------------------------------------------------ IO
    def _io_loop(self) -> None:
        sel = selectors.DefaultSelector()
        sel.register(self.ca_listener, selectors.EVENT_READ, ("accept", "ca"))
        sel.register(self.ta_listener, selectors.EVENT_READ, ("accept", "ta"))
        sel.register(self.launcher_conn.sock, selectors.EVENT_READ,
                     ("conn", self.launcher_conn))
        while not self.stop_requested.is_set():
            for key, _ in sel.select(timeout=TICK):
                tag, payload = key.data
                if tag == "accept":
                    try:
                        client, _ = key.fileobj.accept()
                    except OSError:
                        continue
                    conn = Connection(client, payload, self.config.payload_cap)
                    self.conns[conn.id] = conn
                    sel.register(client, selectors.EVENT_READ, ("conn", conn))
                    continue
                conn = payload
                try:
                    data = conn.sock.recv(1 << 16)
                except OSError:
                    data = b""
                if not data:
                    sel.unregister(conn.sock)
                    self.events.put(("closed", conn))
                    continue
                try:
                    frames = conn.assembler.feed(data)
                except wire.WireError as exc:
                    log.warning("conn %d: %s; dropping connection", conn.id, exc)
                    sel.unregister(conn.sock)
                    conn.sock.close()
                    self.events.put(("closed", conn))
                    continue
                for frame in frames:
                    try:
                        msg = wire.decode(frame, self.config.payload_cap)
                    except wire.WireError as exc:
                        log.warning("conn %d: bad frame: %s", conn.id, exc)
                        continue
                    self.events.put(("frame", conn, msg))
        sel.close()

    # --------------------------------------------------------------- logic
    def run(self) -> int:
        io = threading.Thread(target=self._io_loop, name="manager-io",
                              daemon=True)
        io.start()
        log.info("manager ready (pid %d), %d TA(s) installed",
                 os.getpid(), len(self.metadata))
        while not self.stop_requested.is_set():
            try:
                event = self.events.get(timeout=TICK)
            except queue.Empty:
                self._check_timeouts()
                continue
            if event[0] == "frame":
                _, conn, msg = event
                try:
                    self._dispatch(conn, msg)
                except wire.ConnectionClosed:
                    self.handle_peer_death(conn)
            elif event[0] == "closed":
                self.handle_peer_death(event[1])
            self._check_timeouts()
        self._shutdown()
        return 0

    def _send(self, conn: Connection, msg: wire.Message) -> None:
        try:
            conn.send(msg)
        except wire.ConnectionClosed:
            self.handle_peer_death(conn)

    def _check_timeouts(self) -> None:
        now = time.monotonic()
        for nonce, pl in list(self.pending_launches.items()):
            if now >= pl.deadline:
                log.error("launch of %s timed out", pl.instance.uuid)
                del self.pending_launches[nonce]
                if pl.instance.pid:
                    try:
                        os.kill(pl.instance.pid, signal.SIGKILL)
                    except OSError:
                        pass
                self._fail_launch(pl, codes.ERROR_GENERIC, codes.Origin.COMMS)

    def _fail_launch(self, pl: PendingLaunch, code: int, origin: int) -> None:
        if pl.instance.state == "launching":
            pl.instance.set_state("dead")
        self.instances.pop(pl.instance.id, None)
        for ca_conn, msg in pl.waiters:
            self._send(ca_conn, wire.Message(
                wire.OpenSessionResponse(code, origin),
                message_id=msg.message_id))

    # ----------------------------------------------------------- dispatch
    def _dispatch(self, conn: Connection, msg: wire.Message) -> None:
        body = msg.body
        if conn.kind == "launcher":
            self._from_launcher(body)
            return
        if conn.kind == "ta":
            self._from_ta(conn, msg)
            return
        # CA-facing connection
        if isinstance(body, wire.ControlStatus):
            self._send(conn, wire.Message(self._status_reply(),
                                          message_id=msg.message_id))
        elif isinstance(body, wire.OpenSessionRequest):
            self._route_open_session(conn, msg)
        elif isinstance(body, wire.InvokeRequest):
            self._route_invoke(conn, msg)
        elif isinstance(body, wire.CloseSession):
            self._route_close_session(conn, msg)
        elif isinstance(body, wire.FinalizeContext):
            self._cleanup_ca(conn)
            self._send(conn, wire.Message(wire.FinalizeContext(),
                                          message_id=msg.message_id))
        elif isinstance(body, wire.RegisterSharedMemory):
            self._register_region(conn, msg)
        elif isinstance(body, wire.ReleaseSharedMemory):
            self._release_region(conn, body.region_id)
        elif isinstance(body, wire.Rescan):
            self._rescan()
            self._send(conn, wire.Message(self._status_reply(),
                                          message_id=msg.message_id))
        elif isinstance(body, wire.ListTAs):
            self._send(conn, wire.Message(self._ta_list(),
                                          message_id=msg.message_id))
        elif isinstance(body, (wire.StoragePut, wire.StorageGet,
                               wire.StorageDelete)):
            # Secure storage is reachable from TA connections only.
            self._send(conn, wire.Message(
                wire.StorageReply(codes.ERROR_ACCESS_DENIED),
                message_id=msg.message_id))
        else:
            log.warning("conn %d: unexpected %s from a CA", conn.id,
                        msg.msg_type.name)

    # ------------------------------------------------------------- status
    def _status_reply(self) -> wire.ControlStatusReply:
        running = sum(1 for i in self.instances.values() if i.state == "running")
        return wire.ControlStatusReply(
            state=STATE_READY,
            ta_count=running,
            session_count=len(self.sessions),
            region_count=len(self.regions),
        )

    def _ta_list(self) -> wire.TAListReply:
        entries = []
        for uuid, meta in sorted(self.metadata.items(), key=lambda kv: str(kv[0])):
            state = wire.TA_STATE_NOT_LOADED
            pid = 0
            for inst in self.instances.values():
                if inst.uuid != uuid:
                    continue
                if inst.state == "running":
                    state, pid = wire.TA_STATE_RUNNING, inst.pid
                    break
                if inst.state == "launching":
                    state, pid = wire.TA_STATE_LAUNCHING, inst.pid
            entries.append(wire.TAListEntry(uuid, state, pid,
                                            str(meta.module_path)))
        return wire.TAListReply(entries)

    def _rescan(self) -> None:
        try:
            found = discover_tas(self.config.ta_dir)
        except DiscoveryError as exc:
            log.error("rescan failed: %s", exc)
            return
        self.metadata = {m.uuid: m for m in found}
        log.info("rescan found %d TA(s)", len(found))

    # ----------------------------------------------------- session routing
    def _route_open_session(self, conn: Connection, msg: wire.Message) -> None:
        body = msg.body
        meta = self.metadata.get(body.ta_uuid)
        if meta is None:
            self._send(conn, wire.Message(
                wire.OpenSessionResponse(codes.ERROR_ITEM_NOT_FOUND,
                                         codes.Origin.TEE),
                message_id=msg.message_id))
            return
        props = meta.properties
        if props.single_instance:
            inst = next((i for i in self.instances.values()
                         if i.uuid == meta.uuid and i.state in ("launching",
                                                                "running")
                         and not i.retiring), None)
            if inst is not None:
                if not props.multi_session and self._instance_busy(inst):
                    self._send(conn, wire.Message(
                        wire.OpenSessionResponse(codes.ERROR_ACCESS_CONFLICT,
                                                 codes.Origin.TEE),
                        message_id=msg.message_id))
                    return
                if inst.state == "running":
                    self._forward_open(conn, msg, inst)
                else:
                    self._launch_of(inst).waiters.append((conn, msg))
                return
        self._start_launch(meta, conn, msg)

    def _instance_busy(self, inst: TAInstance) -> bool:
        if inst.sessions:
            return True
        if any(pc.instance is inst for pc in self.pending_calls.values()):
            return True
        pl = self._launch_of(inst, strict=False)
        return bool(pl and pl.waiters)

    def _launch_of(self, inst: TAInstance, strict: bool = True):
        for pl in self.pending_launches.values():
            if pl.instance is inst:
                return pl
        if strict:
            raise AssertionError(f"launching instance {inst.id} has no launch")
        return None

    def _start_launch(self, meta: TAMetadata, conn: Connection,
                      msg: wire.Message) -> None:
        inst = TAInstance(meta)
        inst.set_state("launching")
        self.instances[inst.id] = inst
        nonce = next(self._nonces)
        pl = PendingLaunch(nonce, inst)
        pl.waiters.append((conn, msg))
        self.pending_launches[nonce] = pl
        if not self.launcher_alive:
            del self.pending_launches[nonce]
            self._fail_launch(pl, codes.ERROR_GENERIC, codes.Origin.COMMS)
            return
        log.info("launching TA %s", meta.uuid)
        self._send(self.launcher_conn, wire.Message(
            wire.LaunchTA(meta.uuid, str(meta.module_path), nonce)))

    def _prepare_params(self, conn: Connection, inst: TAInstance,
                        params: wire.ParamSet) -> int:
        """Validate region-backed memrefs and grant regions to the target
        instance.  Returns a return code (SUCCESS or the error)."""
        for p in params.slots:
            if not (isinstance(p, wire.MemRefParam) and p.region_id is not None):
                continue
            region = self.regions.get(p.region_id)
            if region is None or region.owner is not conn:
                return codes.ERROR_BAD_PARAMETERS
            if p.offset + p.length > region.size:
                return codes.ERROR_BAD_PARAMETERS
            if inst.id not in region.granted_to and inst.conn is not None:
                self._send(inst.conn, wire.Message(
                    wire.SharedMemoryGranted(region.region_id, region.token)))
                region.granted_to.add(inst.id)
        return codes.SUCCESS

    def _forward_open(self, conn: Connection, msg: wire.Message,
                      inst: TAInstance) -> None:
        rc = self._prepare_params(conn, inst, msg.body.params)
        if rc != codes.SUCCESS:
            self._send(conn, wire.Message(
                wire.OpenSessionResponse(rc, codes.Origin.API),
                message_id=msg.message_id))
            return
        sid = next(self._session_ids)
        self.sessions[sid] = Session(sid, conn, inst)
        mid = next(self._msg_ids)
        self.pending_calls[mid] = PendingCall("open", conn, msg.message_id,
                                              sid, inst)
        self._send(inst.conn, wire.Message(msg.body, session_id=sid,
                                           message_id=mid))

    def _route_invoke(self, conn: Connection, msg: wire.Message) -> None:
        sid = msg.session_id

        def fail(code, origin):
            self._send(conn, wire.Message(
                wire.InvokeResponse(code, origin),
                session_id=sid, message_id=msg.message_id))

        if sid in self.dead_sessions and self.dead_sessions[sid] is conn:
            fail(codes.ERROR_TARGET_DEAD, codes.Origin.COMMS)
            return
        sess = self.sessions.get(sid)
        if sess is None or sess.ca_conn is not conn or sess.state != "open":
            fail(codes.ERROR_BAD_PARAMETERS, codes.Origin.API)
            return
        inst = sess.instance
        rc = self._prepare_params(conn, inst, msg.body.params)
        if rc != codes.SUCCESS:
            fail(rc, codes.Origin.API)
            return
        mid = next(self._msg_ids)
        self.pending_calls[mid] = PendingCall("invoke", conn, msg.message_id,
                                              sid, inst)
        self._send(inst.conn, wire.Message(msg.body, session_id=sid,
                                           message_id=mid))

    def _route_close_session(self, conn: Connection, msg: wire.Message) -> None:
        sid = msg.session_id
        if self.dead_sessions.get(sid) is conn:
            del self.dead_sessions[sid]
        else:
            sess = self.sessions.get(sid)
            if sess is not None and sess.ca_conn is conn:
                self._close_session(sess, notify_ta=True)
        self._send(conn, wire.Message(wire.CloseSession(), session_id=sid,
                                      message_id=msg.message_id))

    def _close_session(self, sess: Session, notify_ta: bool) -> None:
        self.sessions.pop(sess.session_id, None)
        inst = sess.instance
        inst.sessions.discard(sess.session_id)
        if notify_ta and inst.conn is not None and inst.state == "running":
            self._send(inst.conn, wire.Message(wire.CloseSession(),
                                               session_id=sess.session_id))
        self._maybe_retire(inst)

    def _maybe_retire(self, inst: TAInstance) -> None:
        if inst.state != "running" or inst.retiring:
            return
        if inst.sessions or inst.metadata.properties.instance_keep_alive:
            return
        if any(pc.instance is inst for pc in self.pending_calls.values()):
            return
        inst.retiring = True
        if inst.conn is not None:
            self._send(inst.conn, wire.Message(wire.Shutdown()))

    # ------------------------------------------------------- shared memory
    def _register_region(self, conn: Connection, msg: wire.Message) -> None:
        size, flags = msg.body.size, msg.body.flags

        def refuse(code):
            self._send(conn, wire.Message(
                wire.SharedMemoryGranted(0, "", code),
                message_id=msg.message_id))

        if size <= 0 or size > self.config.region_cap:
            refuse(codes.ERROR_BAD_PARAMETERS)
            return
        rid = next(self._region_ids)
        try:
            token = shm.create_region(rid, size)
        except (shm.ShmError, OSError) as exc:
            log.error("region allocation failed: %s", exc)
            refuse(codes.ERROR_OUT_OF_MEMORY)
            return
        self.regions[rid] = Region(rid, conn, size, flags, token)
        self._send(conn, wire.Message(
            wire.SharedMemoryGranted(rid, token), message_id=msg.message_id))

    def _release_region(self, conn: Connection, region_id: int) -> None:
        region = self.regions.get(region_id)
        if region is None or region.owner is not conn:
            return
        del self.regions[region_id]
        shm.unlink_region(region.token)

    # ------------------------------------------------------------ TA plane
    def _from_launcher(self, body) -> None:
        if isinstance(body, wire.TAReady):
            pl = self.pending_launches.get(body.nonce)
            if pl is not None:
                pl.instance.pid = body.process_handle
            return
        if isinstance(body, wire.LaunchFailed):
            pl = self.pending_launches.pop(body.nonce, None)
            if pl is None:
                return
            log.error("launch of %s failed: %s", pl.instance.uuid, body.reason)
            self._fail_launch(pl, codes.ERROR_GENERIC, codes.Origin.TEE)
            return
        log.warning("unexpected message from launcher: %r", body)

    def _from_ta(self, conn: Connection, msg: wire.Message) -> None:
        body = msg.body
        if conn.instance is None:
            # First frame must authenticate with a pending spawn nonce.
            if isinstance(body, wire.TAReady):
                pl = self.pending_launches.pop(body.nonce, None)
                if pl is not None:
                    inst = pl.instance
                    inst.conn = conn
                    inst.pid = body.process_handle or inst.pid
                    conn.instance = inst
                    inst.set_state("running")
                    log.info("TA %s running as pid %d", inst.uuid, inst.pid)
                    for ca_conn, open_msg in pl.waiters:
                        self._forward_open(ca_conn, open_msg, inst)
                    return
            log.warning("unauthenticated TA connection rejected")
            conn.sock.close()
            self.handle_peer_death(conn)
            return

        if isinstance(body, (wire.OpenSessionResponse, wire.InvokeResponse)):
            pc = self.pending_calls.pop(msg.message_id, None)
            if pc is None:
                return
            if pc.kind == "open":
                sess = self.sessions.get(pc.session_id)
                if sess is not None:
                    if body.return_code == codes.SUCCESS:
                        sess.state = "open"
                        conn.instance.sessions.add(sess.session_id)
                    else:
                        self.sessions.pop(pc.session_id, None)
                        self._maybe_retire(conn.instance)
            self._send(pc.ca_conn, wire.Message(
                body, session_id=pc.session_id, message_id=pc.ca_msg_id))
        elif isinstance(body, wire.StoragePut):
            uuid = conn.instance.uuid
            rc = self.storage.put(uuid, body.object_id, body.flags, body.data)
            self._send(conn, wire.Message(wire.StorageReply(rc),
                                          message_id=msg.message_id))
        elif isinstance(body, wire.StorageGet):
            rc, obj = self.storage.get(conn.instance.uuid, body.object_id)
            reply = wire.StorageReply(rc)
            if obj is not None:
                reply = wire.StorageReply(rc, obj.flags, obj.data)
            self._send(conn, wire.Message(reply, message_id=msg.message_id))
        elif isinstance(body, wire.StorageDelete):
            rc = self.storage.delete(conn.instance.uuid, body.object_id)
            self._send(conn, wire.Message(wire.StorageReply(rc),
                                          message_id=msg.message_id))
        else:
            log.warning("unexpected message %s from TA %s",
                        msg.msg_type.name, conn.instance.uuid)

    # ------------------------------------------------------ peer-death path
    def handle_peer_death(self, conn: Connection) -> None:
        """Release everything a dead peer held; idempotent."""
        if conn.cleaned:
            return
        conn.cleaned = True
        self.conns.pop(conn.id, None)
        try:
            conn.sock.close()
        except OSError:
            pass
        if conn.kind == "launcher":
            log.critical("launcher died; new TA launches will fail")
            self.launcher_alive = False
            for nonce, pl in list(self.pending_launches.items()):
                del self.pending_launches[nonce]
                self._fail_launch(pl, codes.ERROR_GENERIC, codes.Origin.COMMS)
        elif conn.kind == "ta":
            self._cleanup_ta(conn)
        else:
            self._cleanup_ca(conn)

    def _cleanup_ca(self, conn: Connection) -> None:
        for sess in [s for s in self.sessions.values() if s.ca_conn is conn]:
            self._close_session(sess, notify_ta=True)
        for sid in [sid for sid, c in self.dead_sessions.items() if c is conn]:
            del self.dead_sessions[sid]
        for rid in [r.region_id for r in self.regions.values()
                    if r.owner is conn]:
            region = self.regions.pop(rid)
            shm.unlink_region(region.token)
        for mid in [mid for mid, pc in self.pending_calls.items()
                    if pc.ca_conn is conn]:
            del self.pending_calls[mid]
        for pl in self.pending_launches.values():
            pl.waiters = [(c, m) for c, m in pl.waiters if c is not conn]

    def _cleanup_ta(self, conn: Connection) -> None:
        inst = conn.instance
        if inst is None:
            return
        if inst.state in ("launching", "running"):
            inst.set_state("dead")
        self.instances.pop(inst.id, None)
        if inst.retiring:
            log.info("TA %s (pid %d) retired", inst.uuid, inst.pid)
        else:
            log.warning("TA %s (pid %d) died", inst.uuid, inst.pid)
        # In-flight calls are answered target-dead immediately...
        for mid in [mid for mid, pc in self.pending_calls.items()
                    if pc.instance is inst]:
            pc = self.pending_calls.pop(mid)
            reply_cls = (wire.OpenSessionResponse if pc.kind == "open"
                         else wire.InvokeResponse)
            self.sessions.pop(pc.session_id, None)
            self._send(pc.ca_conn, wire.Message(
                reply_cls(codes.ERROR_TARGET_DEAD, codes.Origin.COMMS),
                session_id=pc.session_id, message_id=pc.ca_msg_id))
        # ...and established sessions become tombstones so the owning CA's
        # next invoke reports target-dead rather than bad-parameters.
        for sid in list(inst.sessions):
            sess = self.sessions.pop(sid, None)
            inst.sessions.discard(sid)
            if sess is not None and not inst.retiring:
                self.dead_sessions[sid] = sess.ca_conn

    # ------------------------------------------------------------ shutdown
    def _shutdown(self) -> None:
        log.info("manager shutting down")
        pids = []
        for inst in self.instances.values():
            if inst.conn is not None:
                try:
                    inst.conn.send(wire.Message(wire.Shutdown()))
                except wire.ConnectionClosed:
                    pass
            if inst.pid:
                pids.append(inst.pid)
        deadline = time.monotonic() + 2.0
        while pids and time.monotonic() < deadline:
            pids = [p for p in pids if _pid_alive(p)]
            if pids:
                time.sleep(0.05)
        for pid in pids:
            try:
                os.kill(pid, signal.SIGKILL)
            except OSError:
                pass
        for region in self.regions.values():
            shm.unlink_region(region.token)
        for conn in list(self.conns.values()):
            try:
                conn.sock.close()
            except OSError:
                pass


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except OSError:
        return False
    return True


def manager_main(config: FrameworkConfig, metadata: list[TAMetadata],
                 ca_listener: socket.socket, ta_listener: socket.socket,
                 launcher_sock: socket.socket) -> int:
    mgr = Manager(config, metadata, ca_listener, ta_listener, launcher_sock)

    def _on_term(signum, frame):
        mgr.stop_requested.set()

    signal.signal(signal.SIGTERM, _on_term)
    signal.signal(signal.SIGINT, _on_term)
    try:
        return mgr.run()
    except Exception:
        log.exception("manager crashed")
        return 1
