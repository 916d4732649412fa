"""Framework configuration.

Flat ``key = value`` text file with ``#`` comments.  Unknown keys are
warnings, not errors.  Paths are made absolute; storage_root is created
if absent.
"""

from __future__ import annotations

import logging
import os
import socket as _socket
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger("virtee.config")

LOG_LEVELS = ("error", "warn", "info", "debug")

# sockaddr_un.sun_path limit on Linux
MAX_SOCKET_PATH = 107

DEFAULT_PAYLOAD_CAP = 8 * 1024 * 1024
DEFAULT_REGION_CAP = 16 * 1024 * 1024


class ConfigError(Exception):
    pass


def prefix_dir() -> Path:
    env = os.environ.get("VIRTEE_HOME")
    if env:
        return Path(env)
    return Path.home() / ".virtee"


def runtime_dir() -> Path:
    env = os.environ.get("VIRTEE_RUNTIME")
    if env:
        return Path(env)
    xdg = os.environ.get("XDG_RUNTIME_DIR")
    if xdg:
        return Path(xdg) / "virtee"
    return Path(f"/tmp/virtee-{os.getuid()}")


@dataclass
class FrameworkConfig:
    ta_dir: Path = field(default_factory=lambda: prefix_dir() / "ta")
    storage_root: Path = field(default_factory=lambda: prefix_dir() / "storage")
    control_socket: Path = field(default_factory=lambda: runtime_dir() / "virtee.sock")
    log_level: str = "info"
    payload_cap: int = DEFAULT_PAYLOAD_CAP
    region_cap: int = DEFAULT_REGION_CAP

    @property
    def ta_socket(self) -> Path:
        """Manager's internal endpoint for TA connections."""
        return self.control_socket.with_name(self.control_socket.name + ".ta")

    @property
    def pid_file(self) -> Path:
        return self.control_socket.with_name("virtee.pid")

    def py_log_level(self) -> int:
        return {
            "error": logging.ERROR,
            "warn": logging.WARNING,
            "info": logging.INFO,
            "debug": logging.DEBUG,
        }[self.log_level]


_KNOWN_KEYS = ("ta_dir", "storage_root", "control_socket", "log_level",
               "payload_cap", "region_cap")


def _parse_size(key: str, value: str, line_no: int) -> int:
    try:
        n = int(value, 0)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} is not an integer: {value!r}") from None
    if n <= 0:
        raise ConfigError(f"line {line_no}: {key} must be positive")
    return n


def load_config(path: str | os.PathLike | None = None) -> FrameworkConfig:
    """Load and validate a configuration file.

    ``path`` absent (None or nonexistent default location) yields all
    defaults.  An explicitly given path must exist.
    """
    cfg = FrameworkConfig()
    explicit: dict[str, tuple[int, str]] = {}

    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file does not exist: {p}")
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from None
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {line_no}: expected 'key = value': {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not key:
                raise ConfigError(f"line {line_no}: empty key")
            if key not in _KNOWN_KEYS:
                log.warning("config line %d: unknown key %r ignored", line_no, key)
                continue
            explicit[key] = (line_no, value)

    if "log_level" in explicit:
        line_no, value = explicit["log_level"]
        if value not in LOG_LEVELS:
            raise ConfigError(
                f"line {line_no}: log_level must be one of {', '.join(LOG_LEVELS)}"
            )
        cfg.log_level = value
    if "payload_cap" in explicit:
        cfg.payload_cap = _parse_size("payload_cap", *reversed(explicit["payload_cap"]))
    if "region_cap" in explicit:
        cfg.region_cap = _parse_size("region_cap", *reversed(explicit["region_cap"]))
    if "ta_dir" in explicit:
        cfg.ta_dir = Path(explicit["ta_dir"][1]).expanduser().absolute()
        if not cfg.ta_dir.is_dir():
            raise ConfigError("ta_dir does not exist")
    else:
        cfg.ta_dir.mkdir(parents=True, exist_ok=True)
    if "storage_root" in explicit:
        cfg.storage_root = Path(explicit["storage_root"][1]).expanduser().absolute()
    if "control_socket" in explicit:
        cfg.control_socket = Path(explicit["control_socket"][1]).expanduser().absolute()

    if len(str(cfg.ta_socket)) > MAX_SOCKET_PATH:
        raise ConfigError(
            f"control_socket path too long for a local socket address "
            f"(limit {MAX_SOCKET_PATH}): {cfg.control_socket}"
        )
    return cfg


def probe_socket(path: Path, timeout: float = 0.5) -> bool:
    """True if a live framework answers on the socket path."""
    if not path.exists():
        return False
    s = _socket.socket(_socket.AF_UNIX, _socket.SOCK_STREAM)
    s.settimeout(timeout)
    try:
        s.connect(str(path))
    except OSError:
        return False
    finally:
        s.close()
    return True
