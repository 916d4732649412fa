"""Self-contained framework instances for smoke tests and benchmarks.

EphemeralFramework builds a throwaway prefix (TA dir, storage root,
short socket path), starts ``virtee run`` as a subprocess, and tears
everything down on exit.  It is also what the test suite uses to get a
real running framework.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from .config import probe_socket

START_TIMEOUT = 10.0
STOP_TIMEOUT = 5.0


class FrameworkStartError(Exception):
    pass


class EphemeralFramework:
    def __init__(self, ta_modules: list[Path] | None = None,
                 log_level: str = "info",
                 extra_config: dict | None = None,
                 env: dict | None = None):
        self.ta_modules = [Path(p) for p in (ta_modules or [])]
        self.log_level = log_level
        self.extra_config = dict(extra_config or {})
        self.env = dict(env or {})
        self.root: Path | None = None
        self.proc: subprocess.Popen | None = None

    # Paths are derived from a short mkdtemp root so the socket path
    # stays well under the local-address limit.
    @property
    def socket_path(self) -> Path:
        return self.root / "s"

    @property
    def ta_dir(self) -> Path:
        return self.root / "ta"

    @property
    def storage_root(self) -> Path:
        return self.root / "storage"

    @property
    def config_path(self) -> Path:
        return self.root / "virtee.conf"

    @property
    def log_path(self) -> Path:
        return self.root / "framework.log"

    def start(self) -> "EphemeralFramework":
        self.root = Path(tempfile.mkdtemp(prefix="vtee-", dir="/tmp"))
        self.ta_dir.mkdir()
        self.storage_root.mkdir()
        for module in self.ta_modules:
            shutil.copy(module, self.ta_dir / module.name)
        lines = {
            "ta_dir": str(self.ta_dir),
            "storage_root": str(self.storage_root),
            "control_socket": str(self.socket_path),
            "log_level": self.log_level,
            **{k: str(v) for k, v in self.extra_config.items()},
        }
        self.config_path.write_text(
            "".join(f"{k} = {v}\n" for k, v in lines.items()))
        return self._launch()

    def _launch(self) -> "EphemeralFramework":
        log_file = open(self.log_path, "ab")
        try:
            self.proc = subprocess.Popen(
                [sys.executable, "-m", "virtee",
                 "--config", str(self.config_path), "run"],
                stdout=log_file, stderr=subprocess.STDOUT,
                start_new_session=True,
                env={**os.environ, **self.env} if self.env else None,
            )
        finally:
            log_file.close()

        deadline = time.monotonic() + START_TIMEOUT
        while time.monotonic() < deadline:
            if probe_socket(self.socket_path) and self._answers():
                return self
            if self.proc.poll() is not None:
                break
            time.sleep(0.05)
        tail = self.tail_log()
        self.stop()
        raise FrameworkStartError(f"framework did not come up:\n{tail}")

    def _answers(self) -> bool:
        """True once the Manager actually replies, not merely accepts."""
        from . import client

        try:
            client.initialize_context(self.socket_path, timeout=1.0).finalize()
            return True
        except client.ClientError:
            return False

    def tail_log(self, lines: int = 30) -> str:
        try:
            return "\n".join(
                self.log_path.read_text(errors="replace").splitlines()[-lines:])
        except OSError:
            return "<no log>"

    def manager_pid(self) -> int | None:
        import json

        try:
            info = json.loads((self.root / "virtee.pid").read_text())
            return info.get("manager")
        except (OSError, ValueError):
            return None

    def restart(self) -> "EphemeralFramework":
        """Full framework restart keeping TA dir and storage root."""
        self.stop()
        return self._launch()

    def stop(self) -> None:
        if self.proc is not None and self.proc.poll() is None:
            self.proc.send_signal(signal.SIGTERM)
            try:
                self.proc.wait(STOP_TIMEOUT)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        self.proc = None

    def cleanup(self) -> None:
        self.stop()
        if self.root is not None and self.root.exists():
            shutil.rmtree(self.root, ignore_errors=True)
        self.root = None

    def __enter__(self) -> "EphemeralFramework":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.cleanup()


def wait_gone(pid: int, timeout: float) -> bool:
    """True once ``pid`` no longer exists, polling up to ``timeout``."""
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            os.kill(pid, 0)
        except OSError:
            return True
        time.sleep(0.02)
    return False
