"""Benchmark suites: command latency, per-TA memory, edit-run cycle.

Each suite runs against an ephemeral framework instance and reports
summary statistics; with ``--out`` the raw samples are written as JSON
and CSV next to rendered PNG figures.
"""

from __future__ import annotations

import csv
import json
import py_compile
import statistics
import sys
import tempfile
import time
from pathlib import Path

from . import client, wire
from .example_tas import CONN_TEST_UUID, DIGEST_UUID, EXAMPLES_DIR
from .testbed import EphemeralFramework

WARMUP = 10


# ------------------------------------------------------------- measurement
def _read_smaps_rollup(pid: int) -> dict[str, int]:
    """Memory totals for a process, in KiB, from the kernel's rollup."""
    fields = {}
    try:
        text = Path(f"/proc/{pid}/smaps_rollup").read_text()
    except OSError:
        text = ""
    for line in text.splitlines():
        if ":" not in line:
            continue
        key, _, rest = line.partition(":")
        parts = rest.split()
        if parts and parts[-1] == "kB":
            fields[key.strip()] = int(parts[0])
    return fields


def _memory_of(pid: int) -> dict[str, int]:
    f = _read_smaps_rollup(pid)
    return {
        "rss_kib": f.get("Rss", 0),
        "shared_kib": f.get("Shared_Clean", 0) + f.get("Shared_Dirty", 0),
        "private_kib": f.get("Private_Clean", 0) + f.get("Private_Dirty", 0),
        "pss_kib": f.get("Pss", 0),
    }


def _stats(samples: list[float]) -> dict[str, float]:
    return {
        "n": len(samples),
        "mean": statistics.fmean(samples),
        "stdev": statistics.stdev(samples) if len(samples) > 1 else 0.0,
        "min": min(samples),
        "max": max(samples),
    }


# ------------------------------------------------------------------ suites
def bench_invoke_latency(iterations: int) -> dict:
    from .example_tas import conn_test_ta

    import gc

    with EphemeralFramework(
            ta_modules=[EXAMPLES_DIR / "conn_test_ta.py"]) as fw:
        with client.initialize_context(fw.socket_path) as ctx:
            sess = ctx.open_session(CONN_TEST_UUID)
            for _ in range(WARMUP):
                sess.invoke_command(conn_test_ta.CMD_PING)
            samples = []
            # keep collector pauses out of the measurement window
            gc.collect()
            gc.disable()
            try:
                for _ in range(iterations):
                    t0 = time.perf_counter()
                    sess.invoke_command(conn_test_ta.CMD_PING)
                    samples.append((time.perf_counter() - t0) * 1e6)
            finally:
                gc.enable()
            sess.close()
    return {"unit": "us", "samples": samples, **_stats(samples)}


def bench_spawn_memory() -> dict:
    from .example_tas import conn_test_ta  # noqa: F401  (commands unused)

    with EphemeralFramework(ta_modules=[
            EXAMPLES_DIR / "conn_test_ta.py",
            EXAMPLES_DIR / "digest_ta.py"]) as fw:
        with client.initialize_context(fw.socket_path) as ctx:
            mgr_pid = fw.manager_pid()
            scenarios = {"manager_no_ta": _memory_of(mgr_pid)}

            s1 = ctx.open_session(CONN_TEST_UUID)
            pid1 = next(e.pid for e in ctx.list_tas()
                        if str(e.uuid) == CONN_TEST_UUID and e.pid)
            scenarios["ta1"] = _memory_of(pid1)
            scenarios["manager_one_ta"] = _memory_of(mgr_pid)

            s2 = ctx.open_session(DIGEST_UUID)
            pid2 = next(e.pid for e in ctx.list_tas()
                        if str(e.uuid) == DIGEST_UUID and e.pid)
            scenarios["ta2"] = _memory_of(pid2)
            scenarios["manager_two_tas"] = _memory_of(mgr_pid)
            s2.close()
            s1.close()

    ta1, ta2 = scenarios["ta1"], scenarios["ta2"]
    ratio = (ta2["private_kib"] / ta1["rss_kib"]) if ta1["rss_kib"] else 1.0
    return {
        "unit": "KiB",
        "scenarios": scenarios,
        # Copy-on-write effectiveness: how much of the second TA is
        # unique memory relative to the first TA's full footprint.
        "ta2_private_over_ta1_rss": ratio,
    }


def bench_build_cycle(iterations: int) -> dict:
    src = EXAMPLES_DIR / "conn_test_ta.py"
    samples = []
    with tempfile.TemporaryDirectory(prefix="vtee-build-") as tmp:
        for i in range(iterations):
            out = Path(tmp) / f"cycle_{i}.pyc"
            t0 = time.perf_counter()
            py_compile.compile(str(src), cfile=str(out), doraise=True)
            samples.append((time.perf_counter() - t0) * 1e3)
    return {"unit": "ms", "samples": samples, **_stats(samples)}


# ----------------------------------------------------------------- output
def _write_artifacts(results: dict, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "bench.json"
    json_path.write_text(json.dumps(results, indent=2) + "\n")
    written.append(json_path)

    csv_path = out_dir / "bench.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["suite", "metric", "value", "unit"])
        for suite, data in results.items():
            unit = data.get("unit", "")
            for key in ("n", "mean", "stdev", "min", "max"):
                if key in data:
                    writer.writerow([suite, key, data[key], unit])
            for i, s in enumerate(data.get("samples", [])):
                writer.writerow([suite, f"sample_{i}", s, unit])
            for name, mem in data.get("scenarios", {}).items():
                for key, val in mem.items():
                    writer.writerow([suite, f"{name}.{key}", val, unit])
            if "ta2_private_over_ta1_rss" in data:
                writer.writerow([suite, "ta2_private_over_ta1_rss",
                                 data["ta2_private_over_ta1_rss"], "ratio"])
    written.append(csv_path)

    written += _render_figures(results, out_dir)
    return written


def _render_figures(results: dict, out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for suite in ("invoke-latency", "build-cycle"):
        data = results.get(suite)
        if not data or not data.get("samples"):
            continue
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        ax1.plot(data["samples"], marker=".", linestyle="-")
        ax1.set_xlabel("iteration")
        ax1.set_ylabel(data["unit"])
        ax1.set_title(f"{suite} per iteration")
        ax2.hist(data["samples"], bins=min(20, len(data["samples"])))
        ax2.set_xlabel(data["unit"])
        ax2.set_title(f"{suite} distribution")
        fig.tight_layout()
        path = out_dir / f"{suite}.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    data = results.get("spawn-memory")
    if data:
        scenarios = data["scenarios"]
        names = list(scenarios)
        metrics = ["rss_kib", "shared_kib", "private_kib", "pss_kib"]
        fig, ax = plt.subplots(figsize=(9, 4))
        width = 0.2
        for j, metric in enumerate(metrics):
            xs = [i + (j - 1.5) * width for i in range(len(names))]
            ax.bar(xs, [scenarios[n][metric] for n in names], width,
                   label=metric)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_ylabel("KiB")
        ax.set_title("process memory by scenario")
        ax.legend()
        fig.tight_layout()
        path = out_dir / "spawn-memory.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def _print_summary(results: dict) -> None:
    for suite, data in results.items():
        print(f"\n== {suite} ==")
        if "mean" in data:
            print(f"  n={data['n']}  mean={data['mean']:.1f} {data['unit']}  "
                  f"stdev={data['stdev']:.1f}  min={data['min']:.1f}  "
                  f"max={data['max']:.1f}")
        for name, mem in data.get("scenarios", {}).items():
            print(f"  {name:16s} rss={mem['rss_kib']:7d} KiB  "
                  f"shared={mem['shared_kib']:7d}  "
                  f"private={mem['private_kib']:7d}  pss={mem['pss_kib']:7d}")
        if "ta2_private_over_ta1_rss" in data:
            print(f"  second-TA private / first-TA rss = "
                  f"{data['ta2_private_over_ta1_rss']:.2f}")


def run_bench(args) -> int:
    suites = ([args.suite] if args.suite != "all"
              else ["invoke-latency", "spawn-memory", "build-cycle"])
    results: dict[str, dict] = {}
    for suite in suites:
        print(f"running {suite} ...", file=sys.stderr)
        if suite == "invoke-latency":
            results[suite] = bench_invoke_latency(args.iterations)
        elif suite == "spawn-memory":
            results[suite] = bench_spawn_memory()
        elif suite == "build-cycle":
            results[suite] = bench_build_cycle(args.iterations)
    _print_summary(results)
    if args.out:
        for path in _write_artifacts(results, Path(args.out)):
            print(f"wrote {path}")
    return 0
