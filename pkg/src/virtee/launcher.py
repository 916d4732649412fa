"""Zygote-style TA factory.

The Launcher pre-loads the TA runtime once, then serves LaunchTA
commands from the Manager by forking itself; each clone loads the
requested TA module, reports its load result back through a pipe, and
connects to the Manager's internal endpoint authenticated by the spawn
nonce carried in LaunchTA.  Pages shared with the template are
copy-on-write, so per-TA startup cost and unique memory stay small.
"""

from __future__ import annotations

import importlib
import logging
import os
import resource
import select
import signal
import socket

from . import wire
from .ta.module import TAModuleError, load_ta_module
from .ta.runtime import TARuntime

log = logging.getLogger("virtee.launcher")

PRELOAD_MODULES = (
    "virtee.ta.runtime",
    "virtee.ta.crypto",
    "virtee.ta.surface",
    "virtee.shm",
    "cryptography.hazmat.primitives.ciphers",
)

# Clone load-result protocol on the status pipe: one status byte then an
# optional utf-8 diagnostic.
_STATUS_OK = b"\x00"
_STATUS_FAILED = b"\x01"

LOAD_TIMEOUT = 10.0

# RLIMIT_STACK below this would break the interpreter itself, so the
# configured stackSize is clamped up to it.
STACK_FLOOR = 512 * 1024


class PreloadError(Exception):
    pass


def preload_runtime(extra: str | None = None) -> None:
    """Import the TA runtime and common libraries into the template.

    ``extra`` (default: the VIRTEE_PRELOAD environment variable) names
    additional comma-separated modules to pre-load; a module that fails
    to import is a fatal bootstrap error.
    """
    if extra is None:
        extra = os.environ.get("VIRTEE_PRELOAD", "")
    names = list(PRELOAD_MODULES) + [m for m in extra.split(",") if m.strip()]
    for name in names:
        try:
            importlib.import_module(name.strip())
        except Exception as exc:
            raise PreloadError(f"cannot preload {name.strip()}: {exc}") from exc


def _apply_stack_limit(stack_size: int) -> None:
    limit = max(stack_size, STACK_FLOOR)
    try:
        _, hard = resource.getrlimit(resource.RLIMIT_STACK)
        if hard != resource.RLIM_INFINITY:
            limit = min(limit, hard)
        resource.setrlimit(resource.RLIMIT_STACK, (limit, hard))
    except (ValueError, OSError) as exc:
        log.warning("could not apply stack limit %d: %s", limit, exc)


def _run_ta_child(module_path: str, ta_socket: str, nonce: int,
                  status_fd: int) -> int:
    """Body of the forked clone; never returns to the command loop."""
    signal.signal(signal.SIGCHLD, signal.SIG_DFL)
    signal.signal(signal.SIGTERM, signal.SIG_DFL)
    try:
        module, props = load_ta_module(module_path)
    except TAModuleError as exc:
        os.write(status_fd, _STATUS_FAILED + str(exc).encode()[:4000])
        os.close(status_fd)
        return 1
    _apply_stack_limit(props.stack_size)
    os.write(status_fd, _STATUS_OK)
    os.close(status_fd)

    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    try:
        sock.connect(ta_socket)
    except OSError as exc:
        log.error("TA cannot reach manager at %s: %s", ta_socket, exc)
        return 1
    wire.send_message(sock, wire.Message(
        wire.TAReady(process_handle=os.getpid(), nonce=nonce)))
    runtime = TARuntime(module, props, sock)
    return runtime.run()


class Launcher:
    def __init__(self, manager_sock: socket.socket, ta_socket_path: str):
        self.manager_sock = manager_sock
        self.ta_socket_path = ta_socket_path

    def run(self) -> int:
        preload_runtime()
        # Auto-reap clones; the Manager observes TA death through its own
        # connection, the Launcher only avoids zombies.
        signal.signal(signal.SIGCHLD, signal.SIG_IGN)
        log.info("launcher ready (pid %d)", os.getpid())
        while True:
            try:
                msg = wire.recv_message(self.manager_sock)
            except wire.ConnectionClosed:
                log.info("manager channel closed; launcher exiting")
                return 0
            except wire.WireError as exc:
                log.error("protocol error on manager channel: %s", exc)
                return 1
            if isinstance(msg.body, wire.Shutdown):
                return 0
            if not isinstance(msg.body, wire.LaunchTA):
                log.warning("unexpected message %s ignored", msg.msg_type.name)
                continue
            self._spawn(msg.body)

    def _spawn(self, cmd: wire.LaunchTA) -> None:
        read_fd, write_fd = os.pipe()
        pid = os.fork()
        if pid == 0:
            status = 1
            try:
                os.close(read_fd)
                self.manager_sock.close()
                status = _run_ta_child(cmd.module_path, self.ta_socket_path,
                                       cmd.nonce, write_fd)
            except BaseException:
                log.exception("TA process died on an unhandled error")
            finally:
                os._exit(status)

        os.close(write_fd)
        try:
            reply = self._read_load_result(read_fd, pid, cmd.nonce)
        finally:
            os.close(read_fd)
        wire.send_message(self.manager_sock, wire.Message(reply))

    def _read_load_result(self, read_fd: int, pid: int, nonce: int):
        ready, _, _ = select.select([read_fd], [], [], LOAD_TIMEOUT)
        if not ready:
            os.kill(pid, signal.SIGKILL)
            return wire.LaunchFailed(nonce, "clone did not report in time")
        data = os.read(read_fd, 4096)
        if data[:1] == _STATUS_OK:
            return wire.TAReady(process_handle=pid, nonce=nonce)
        reason = data[1:].decode("utf-8", "replace") or "clone load failure"
        return wire.LaunchFailed(nonce, reason)


def launcher_main(manager_sock: socket.socket, ta_socket_path: str) -> int:
    try:
        return Launcher(manager_sock, ta_socket_path).run()
    except PreloadError as exc:
        log.critical("runtime preload failed: %s", exc)
        return 3
    except Exception:
        log.exception("launcher crashed")
        return 1
