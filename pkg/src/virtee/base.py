"""Framework bootstrap and supervision.

The Base process owns the listening sockets and the pidfile.  It binds
both endpoints, forks the Manager and the Launcher, then supervises
them: if either dies unexpectedly the pair is torn down and restarted
together, up to a restart budget, so a wedged half can never be paired
with a fresh one.
"""

from __future__ import annotations

import json
import logging
import os
import signal
import socket
import sys
import time
from pathlib import Path

from .config import FrameworkConfig, probe_socket
from .discovery import DiscoveryError, discover_tas
from .launcher import launcher_main
from .manager import manager_main

log = logging.getLogger("virtee.base")

READY_TIMEOUT = 10.0
RESTART_LIMIT = 3
RESTART_WINDOW = 60.0
REAP_GRACE = 3.0


class BaseError(Exception):
    pass


class AlreadyRunning(BaseError):
    pass


def _bind_listener(path: Path) -> socket.socket:
    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    try:
        sock.bind(str(path))
    except OSError as exc:
        sock.close()
        raise BaseError(f"cannot bind {path}: {exc}") from exc
    sock.listen(64)
    return sock


def _fork_child(name: str, main, ready_wr: int, close_fds) -> int:
    """Fork a framework process; the child signals readiness with one
    byte on ``ready_wr`` and never returns."""
    pid = os.fork()
    if pid != 0:
        return pid
    status = 1
    try:
        signal.signal(signal.SIGTERM, signal.SIG_DFL)
        signal.signal(signal.SIGINT, signal.SIG_IGN)
        for fd in close_fds:
            try:
                fd.close()
            except OSError:
                pass
        os.write(ready_wr, b"\x01")
        os.close(ready_wr)
        status = main()
    except SystemExit as exc:
        status = exc.code if isinstance(exc.code, int) else 1
    except BaseException:
        log.exception("%s process died on an unhandled error", name)
    finally:
        os._exit(status if isinstance(status, int) else 1)


def _wait_ready(fds: list[int], timeout: float = READY_TIMEOUT) -> bool:
    import select

    deadline = time.monotonic() + timeout
    pending = set(fds)
    while pending:
        left = deadline - time.monotonic()
        if left <= 0:
            return False
        ready, _, _ = select.select(list(pending), [], [], left)
        for fd in ready:
            if os.read(fd, 1):
                pending.discard(fd)
            else:
                return False
    return True


class Base:
    def __init__(self, config: FrameworkConfig):
        self.config = config
        self.metadata = []
        self.ca_listener: socket.socket | None = None
        self.ta_listener: socket.socket | None = None
        self.manager_pid = 0
        self.launcher_pid = 0
        self.stopping = False
        self._restarts: list[float] = []

    # ---------------------------------------------------------- bootstrap
    def _check_not_running(self) -> None:
        sock = self.config.control_socket
        if probe_socket(sock):
            raise AlreadyRunning(f"a framework is already serving {sock}")
        # A dead instance may have left stale sockets behind.
        for path in (sock, self.config.ta_socket):
            if path.exists():
                log.warning("removing stale socket %s", path)
                path.unlink()

    def _write_pidfile(self) -> None:
        self.config.pid_file.write_text(json.dumps({
            "base": os.getpid(),
            "manager": self.manager_pid,
            "launcher": self.launcher_pid,
            "control_socket": str(self.config.control_socket),
        }))

    def _spawn_pair(self) -> bool:
        mgr_end, launcher_end = socket.socketpair(socket.AF_UNIX,
                                                  socket.SOCK_STREAM)
        mgr_ready_r, mgr_ready_w = os.pipe()
        lau_ready_r, lau_ready_w = os.pipe()

        config, metadata = self.config, self.metadata
        ca, ta = self.ca_listener, self.ta_listener

        self.manager_pid = _fork_child(
            "manager",
            lambda: manager_main(config, metadata, ca, ta, mgr_end),
            mgr_ready_w, close_fds=[launcher_end])
        self.launcher_pid = _fork_child(
            "launcher",
            lambda: launcher_main(launcher_end, str(config.ta_socket)),
            lau_ready_w, close_fds=[mgr_end, ca, ta])

        mgr_end.close()
        launcher_end.close()
        os.close(mgr_ready_w)
        os.close(lau_ready_w)
        try:
            ok = _wait_ready([mgr_ready_r, lau_ready_r])
        finally:
            os.close(mgr_ready_r)
            os.close(lau_ready_r)
        if not ok:
            log.error("framework processes did not come up in time")
            self._kill_pair()
            return False
        self._write_pidfile()
        log.info("framework up: manager pid %d, launcher pid %d",
                 self.manager_pid, self.launcher_pid)
        return True

    # --------------------------------------------------------- supervision
    def _kill_pair(self, sig: int = signal.SIGTERM) -> None:
        for pid in (self.manager_pid, self.launcher_pid):
            if pid:
                try:
                    os.kill(pid, sig)
                except OSError:
                    pass
        deadline = time.monotonic() + REAP_GRACE
        while time.monotonic() < deadline:
            if not self._reap() and not (self.manager_pid or self.launcher_pid):
                break
            if not (self.manager_pid or self.launcher_pid):
                break
            time.sleep(0.05)
        for pid in (self.manager_pid, self.launcher_pid):
            if pid:
                try:
                    os.kill(pid, signal.SIGKILL)
                except OSError:
                    pass
                try:
                    os.waitpid(pid, 0)
                except OSError:
                    pass
        self.manager_pid = self.launcher_pid = 0

    def _reap(self) -> bool:
        """Collect exited children; True if one was collected."""
        try:
            pid, status = os.waitpid(-1, os.WNOHANG)
        except ChildProcessError:
            return False
        if pid == 0:
            return False
        if pid == self.manager_pid:
            self.manager_pid = 0
            log.error("manager exited with status %d", os.waitstatus_to_exitcode(status))
        elif pid == self.launcher_pid:
            self.launcher_pid = 0
            log.error("launcher exited with status %d", os.waitstatus_to_exitcode(status))
        return True

    def _restart_allowed(self) -> bool:
        now = time.monotonic()
        self._restarts = [t for t in self._restarts if now - t < RESTART_WINDOW]
        if len(self._restarts) >= RESTART_LIMIT:
            return False
        self._restarts.append(now)
        return True

    # --------------------------------------------------------------- main
    def run(self) -> int:
        self._check_not_running()
        try:
            self.metadata = discover_tas(self.config.ta_dir)
        except DiscoveryError as exc:
            log.critical("%s", exc)
            return 1
        log.info("discovered %d TA(s) in %s", len(self.metadata),
                 self.config.ta_dir)
        self.config.storage_root.mkdir(parents=True, exist_ok=True)
        self.ca_listener = _bind_listener(self.config.control_socket)
        try:
            self.ta_listener = _bind_listener(self.config.ta_socket)
        except BaseError:
            self._unlink_sockets()
            raise

        signal.signal(signal.SIGTERM, self._on_term)
        signal.signal(signal.SIGINT, self._on_term)

        try:
            if not self._spawn_pair():
                return 1
            return self._supervise()
        finally:
            self._kill_pair()
            self._unlink_sockets()
            self.config.pid_file.unlink(missing_ok=True)

    def _supervise(self) -> int:
        while not self.stopping:
            if not self._reap():
                time.sleep(0.1)
                continue
            if self.stopping:
                break
            # One down means the pair restarts together.
            self._kill_pair()
            if not self._restart_allowed():
                log.critical("restart budget exhausted (%d in %.0fs); giving up",
                             RESTART_LIMIT, RESTART_WINDOW)
                return 1
            log.warning("restarting framework processes")
            if not self._spawn_pair():
                return 1
        log.info("base shutting down")
        return 0

    def _on_term(self, signum, frame) -> None:
        self.stopping = True

    def _unlink_sockets(self) -> None:
        for sock, path in ((self.ca_listener, self.config.control_socket),
                           (self.ta_listener, self.config.ta_socket)):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
            Path(path).unlink(missing_ok=True)


def read_pidfile(config: FrameworkConfig) -> dict | None:
    try:
        return json.loads(config.pid_file.read_text())
    except (OSError, ValueError):
        return None


def base_main(config: FrameworkConfig) -> int:
    logging.basicConfig(
        level=config.py_log_level(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return Base(config).run()
    except AlreadyRunning as exc:
        log.error("%s", exc)
        return 2
    except BaseError as exc:
        log.error("%s", exc)
        return 1
