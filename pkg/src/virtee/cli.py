"""Command-line front end.

Exit codes: 0 success, 1 operation failure, 2 framework unreachable or
already running.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import signal
import subprocess
import sys
import time
from pathlib import Path

from . import client, codes, wire
from .base import base_main, read_pidfile
from .config import ConfigError, FrameworkConfig, load_config, probe_socket
from .example_tas import CONN_TEST_UUID, DIGEST_UUID, EXAMPLES_DIR

log = logging.getLogger("virtee.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_UNREACHABLE = 2

TA_STATE_NAMES = {
    wire.TA_STATE_NOT_LOADED: "not-loaded",
    wire.TA_STATE_LAUNCHING: "launching",
    wire.TA_STATE_RUNNING: "running",
    wire.TA_STATE_DEAD: "dead",
}


def _load_config(args) -> FrameworkConfig:
    path = args.config or os.environ.get("VIRTEE_CONFIG")
    if path is not None and not Path(path).exists() and args.config is None:
        path = None  # a bad env var must not break read-only commands
    return load_config(path)


def _socket_path(args, config: FrameworkConfig) -> Path:
    if args.socket:
        return Path(args.socket)
    env = os.environ.get("VIRTEE_SOCKET")
    if env:
        return Path(env)
    return config.control_socket


def _connect(args, config: FrameworkConfig) -> client.Context:
    return client.initialize_context(_socket_path(args, config))


def _emit(args, data: dict, human: str) -> None:
    print(json.dumps(data, indent=2) if args.json else human)


# ---------------------------------------------------------------- commands
def cmd_run(args, config: FrameworkConfig) -> int:
    return base_main(config)


def cmd_start(args, config: FrameworkConfig) -> int:
    if probe_socket(config.control_socket):
        print(f"already running at {config.control_socket}", file=sys.stderr)
        return EXIT_UNREACHABLE
    config.control_socket.parent.mkdir(parents=True, exist_ok=True)
    log_path = config.control_socket.with_name("virtee.log")
    cmd = [sys.executable, "-m", "virtee"]
    if args.config:
        cmd += ["--config", args.config]
    cmd.append("run")
    with open(log_path, "ab") as log_file:
        proc = subprocess.Popen(cmd, stdout=log_file, stderr=subprocess.STDOUT,
                                start_new_session=True)
    deadline = time.monotonic() + 10.0
    while time.monotonic() < deadline:
        if probe_socket(config.control_socket):
            _emit(args, {"pid": proc.pid, "socket": str(config.control_socket)},
                  f"started (pid {proc.pid}, socket {config.control_socket})")
            return EXIT_OK
        if proc.poll() is not None:
            break
        time.sleep(0.05)
    print(f"framework failed to start; see {log_path}", file=sys.stderr)
    return EXIT_FAILURE


def cmd_stop(args, config: FrameworkConfig) -> int:
    info = read_pidfile(config)
    if info is None or "base" not in info:
        print("not running (no pidfile)", file=sys.stderr)
        return EXIT_UNREACHABLE
    pid = info["base"]
    try:
        os.kill(pid, signal.SIGTERM)
    except OSError:
        print(f"stale pidfile (pid {pid} gone); removing", file=sys.stderr)
        config.pid_file.unlink(missing_ok=True)
        return EXIT_UNREACHABLE
    deadline = time.monotonic() + 10.0
    while time.monotonic() < deadline:
        try:
            os.kill(pid, 0)
        except OSError:
            _emit(args, {"stopped": pid}, f"stopped (pid {pid})")
            return EXIT_OK
        time.sleep(0.05)
    print(f"pid {pid} did not exit in time", file=sys.stderr)
    return EXIT_FAILURE


def cmd_status(args, config: FrameworkConfig) -> int:
    try:
        with _connect(args, config) as ctx:
            st = ctx.status()
    except client.ClientError as exc:
        _emit(args, {"state": "down", "error": str(exc)}, f"down: {exc}")
        return EXIT_UNREACHABLE
    _emit(args, {
        "state": "ready",
        "running_tas": st.ta_count,
        "sessions": st.session_count,
        "regions": st.region_count,
    }, f"ready: {st.ta_count} TA(s) running, {st.session_count} session(s), "
       f"{st.region_count} shared region(s)")
    return EXIT_OK


def cmd_list_tas(args, config: FrameworkConfig) -> int:
    try:
        with _connect(args, config) as ctx:
            entries = ctx.list_tas()
    except client.ClientError as exc:
        print(f"cannot reach framework: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    if args.json:
        print(json.dumps([{
            "uuid": str(e.uuid), "state": TA_STATE_NAMES.get(e.state, "?"),
            "pid": e.pid, "module": e.module_path,
        } for e in entries], indent=2))
    else:
        for e in entries:
            pid = str(e.pid) if e.pid else "-"
            print(f"{e.uuid}  {TA_STATE_NAMES.get(e.state, '?'):10s}  "
                  f"{pid:>7s}  {e.module_path}")
        if not entries:
            print("no TAs installed")
    return EXIT_OK


def cmd_rescan(args, config: FrameworkConfig) -> int:
    try:
        with _connect(args, config) as ctx:
            ctx.rescan()
            entries = ctx.list_tas()
    except client.ClientError as exc:
        print(f"cannot reach framework: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    _emit(args, {"installed_tas": len(entries)},
          f"rescan complete: {len(entries)} TA(s) installed")
    return EXIT_OK


def cmd_smoke_test(args, config: FrameworkConfig) -> int:
    from .example_tas import conn_test_ta, digest_ta
    from .testbed import EphemeralFramework, FrameworkStartError

    checks: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        checks.append((name, ok, detail))
        mark = "ok" if ok else "FAIL"
        print(f"{mark:4s} - {name}" + (f": {detail}" if detail and not ok else ""))

    fw = EphemeralFramework(ta_modules=[
        EXAMPLES_DIR / "conn_test_ta.py",
        EXAMPLES_DIR / "digest_ta.py",
    ])
    try:
        fw.start()
    except FrameworkStartError as exc:
        check("framework starts", False, str(exc))
        return EXIT_FAILURE
    try:
        with client.initialize_context(fw.socket_path) as ctx:
            check("framework starts and answers status", True)

            tas = {str(e.uuid) for e in ctx.list_tas()}
            check("examples discovered",
                  {CONN_TEST_UUID, DIGEST_UUID} <= tas, str(tas))

            sess = ctx.open_session(CONN_TEST_UUID)
            check("session opens", True)

            sess.invoke_command(conn_test_ta.CMD_PING)
            check("ping round-trip", True)

            v = client.value(a=41, b=7, direction=wire.Direction.IN)
            out = client.value(direction=wire.Direction.OUT)
            sess.invoke_command(conn_test_ta.CMD_ECHO_VALUE, [v, out])
            check("value echo", out.a == 41 and out.b == 7,
                  f"got a={out.a} b={out.b}")

            blob = os.urandom(512)
            ref = client.tmpref(b"\x00" * 512, direction=wire.Direction.OUT)
            sess.invoke_command(conn_test_ta.CMD_ECHO_MEMREF,
                                [client.tmpref(blob, wire.Direction.IN), ref])
            check("inline buffer echo", ref.data == blob)

            memory = ctx.allocate_shared_memory(1024)
            memory.buffer[:512] = blob
            sess.invoke_command(conn_test_ta.CMD_ECHO_MEMREF, [
                client.memref(memory, 0, 512, wire.Direction.IN),
                client.memref(memory, 512, 512, wire.Direction.OUT),
            ])
            check("shared-region echo", bytes(memory.buffer[512:]) == blob)
            memory.release()

            try:
                ctx.open_session(CONN_TEST_UUID, [client.value(
                    a=conn_test_ta.OPEN_REJECT_MAGIC,
                    direction=wire.Direction.IN)])
                check("TA open rejection propagates", False, "no error raised")
            except client.ClientError as exc:
                check("TA open rejection propagates",
                      exc.code == conn_test_ta.RC_OPEN_REJECTED
                      and exc.origin == codes.Origin.TRUSTED_APP,
                      str(exc))

            dsess = ctx.open_session(DIGEST_UUID)
            msg = b"smoke test payload"
            out_ref = client.tmpref(b"\x00" * 32, direction=wire.Direction.OUT)
            dsess.invoke_command(digest_ta.CMD_HASH,
                                 [client.tmpref(msg, wire.Direction.IN), out_ref])
            check("TA digest matches local hash",
                  out_ref.data == hashlib.sha256(msg).digest())

            oid, payload = b"smoke-object", b"persisted bytes"
            dsess.invoke_command(digest_ta.CMD_STORE,
                                 [client.tmpref(oid, wire.Direction.IN),
                                  client.tmpref(payload, wire.Direction.IN)])
            loaded = client.tmpref(b"\x00" * 64, direction=wire.Direction.OUT)
            dsess.invoke_command(digest_ta.CMD_LOAD,
                                 [client.tmpref(oid, wire.Direction.IN), loaded])
            check("secure storage store/load",
                  loaded.data[: loaded.length] == payload)

            dsess.close()
            sess.close()
            check("sessions close", True)
    except client.ClientError as exc:
        check("client operation", False, str(exc))
    finally:
        fw.stop()
        stopped = not probe_socket(fw.socket_path)
        check("framework stops cleanly", stopped)
        if not all(ok for _, ok, _ in checks):
            print("--- framework log tail ---", file=sys.stderr)
            print(fw.tail_log(), file=sys.stderr)
        fw.cleanup()

    failed = [name for name, ok, _ in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_FAILURE


def cmd_bench(args, config: FrameworkConfig) -> int:
    from . import bench

    return bench.run_bench(args)


# ------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="virtee",
        description="User-space trusted execution framework",
    )
    parser.add_argument("--config", help="configuration file path")
    parser.add_argument("--socket", help="framework control socket path")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable output where applicable")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", help="run the framework in the foreground")
    sub.add_parser("start", help="start the framework in the background")
    sub.add_parser("stop", help="stop a background framework")
    sub.add_parser("status", help="show framework status")
    sub.add_parser("list-tas", help="list installed TAs")
    sub.add_parser("rescan", help="re-discover the TA directory")
    sub.add_parser("smoke-test",
                   help="start an ephemeral instance and exercise it")

    b = sub.add_parser("bench", help="run the benchmark suites")
    b.add_argument("--suite", choices=["invoke-latency", "spawn-memory",
                                       "build-cycle", "all"],
                   default="all")
    b.add_argument("--iterations", type=int, default=40)
    b.add_argument("--out", help="directory for JSON/CSV/figure output")
    return parser


COMMANDS = {
    "run": cmd_run,
    "start": cmd_start,
    "stop": cmd_stop,
    "status": cmd_status,
    "list-tas": cmd_list_tas,
    "rescan": cmd_rescan,
    "smoke-test": cmd_smoke_test,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if args.socket:
        config.control_socket = Path(args.socket).absolute()
    return COMMANDS[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
