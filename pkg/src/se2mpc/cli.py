"""Command-line entry point.

Subcommands:
  run   -- open-loop solve, closed-loop simulation or the benchmark sweep
  plot  -- emit a gnuplot script for a previously exported trace CSV

Exit codes: 0 finished, 1 collision, 2 usage error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .controller import make_controller
from .simulation import (
    compute_metrics,
    export_trace_csv,
    run_closed_loop,
    write_gnuplot_script,
)
from .scenarios import BUILTIN_SCENARIOS, Scenario, get_scenario

EXIT_FINISHED = 0
EXIT_COLLISION = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

log = logging.getLogger("se2mpc")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_scenario(args) -> Scenario:
    if args.builtin:
        return get_scenario(args.builtin)
    return Scenario.load(args.scenario)


def _apply_overrides(scenario: Scenario, args) -> None:
    if args.kernel:
        scenario.data["solver"]["kernel"] = args.kernel
    if args.grid:
        scenario.data["solver"]["grid_mode"] = args.grid
    if args.controller:
        scenario.data["controller"]["variant"] = args.controller
    scenario._cache.clear()


def _metrics_dict(metrics) -> dict:
    return {
        "travel_time_s": metrics.travel_time,
        "path_length_m": metrics.path_length,
        "control_effort": metrics.control_effort,
        "cpu_median_ms": metrics.cpu_median_ms,
        "cpu_quantiles_ms": [metrics.cpu_q05_ms, metrics.cpu_q95_ms],
    }


def _run_one(scenario, variant, rate, max_sim_time):
    trace = run_closed_loop(
        scenario, rate=rate, max_sim_time=max_sim_time, variant=variant
    )
    return trace, compute_metrics(trace, rate)


def cmd_run(args) -> int:
    try:
        scenario = _load_scenario(args)
        _apply_overrides(scenario, args)
    except (KeyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = args.out
    os.makedirs(out, exist_ok=True)
    _atomic_write(os.path.join(out, "config.json"), scenario.to_json())

    if args.mode == "benchmark":
        return cmd_bench(scenario, args)

    if args.mode == "open-loop":
        controller = make_controller(scenario, args.controller or None)
        controller.set_goal(scenario.goals[0])
        _, diag = controller.step(scenario.start, 0.0, 1.0 / args.rate)
        grid = controller.state.grid
        if grid is None:
            print("solver failed to produce a trajectory", file=sys.stderr)
            return EXIT_SOLVER
        summary = {
            "status": diag.status,
            "cost": diag.cost,
            "tf_star": diag.tf_star,
            "N": diag.N,
            "solve_ms": 1e3 * diag.solve_time,
            "states": np.asarray(grid.states).tolist(),
            "controls": np.asarray(grid.controls).tolist(),
            "dts": np.asarray(grid.dts).tolist(),
        }
        _atomic_write(
            os.path.join(out, "open_loop.json"), json.dumps(summary, indent=2) + "\n"
        )
        print(f"open-loop solve: {diag.status}, tf* = {diag.tf_star:.3f} s")
        return EXIT_FINISHED if diag.status == "ok" else EXIT_SOLVER

    trace, metrics = _run_one(scenario, args.controller or None, args.rate, args.max_sim_time)
    csv_path = os.path.join(out, "trace.csv")
    export_trace_csv(trace, csv_path)
    _atomic_write(
        os.path.join(out, "metrics.json"),
        json.dumps({"outcome": trace.outcome, **_metrics_dict(metrics)}, indent=2) + "\n",
    )
    print(f"closed-loop outcome: {trace.outcome} ({len(trace)} steps)")
    if trace.outcome == "collision":
        return EXIT_COLLISION
    if trace.outcome == "timeout":
        return EXIT_SOLVER
    return EXIT_FINISHED


def cmd_bench(scenario, args) -> int:
    """Run the To / Quad / Hybrid sweep and print a metrics table."""
    rows = []
    failed = False
    results = {}
    for variant, label in (("to", "To"), ("quad", "Quad"), ("hybrid", "Hybrid")):
        try:
            trace, m = _run_one(scenario, variant, args.rate, args.max_sim_time)
            ok = trace.outcome == "finished"
        except Exception as exc:  # noqa: BLE001 - report, keep sweeping
            log.error("variant %s failed: %s", variant, exc)
            ok = False
            trace, m = None, None
        if not ok:
            rows.append((label, "failed", "-", "-", "-"))
            failed = True
            continue
        results[label] = {"outcome": trace.outcome, **_metrics_dict(m)}
        rows.append(
            (
                label,
                f"{m.cpu_median_ms:.1f} [{m.cpu_q05_ms:.1f}, {m.cpu_q95_ms:.1f}]",
                f"{m.travel_time:.1f}",
                f"{m.path_length:.2f}",
                f"{m.control_effort:.2f}",
            )
        )
    header = ("Planner", "CPU Time [ms]", "Travel Time [s]", "Path Length [m]", "Control Effort")
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(5)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    print(fmt.format(*header))
    for r in rows:
        print(fmt.format(*r))
    _atomic_write(
        os.path.join(args.out, "benchmark.json"), json.dumps(results, indent=2) + "\n"
    )
    return EXIT_SOLVER if failed else EXIT_FINISHED


def cmd_plot(args) -> int:
    try:
        write_gnuplot_script(args.csv, args.out_script)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {args.out_script}")
    return EXIT_FINISHED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="se2mpc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=sorted(BUILTIN_SCENARIOS), help="builtin scenario")
    src.add_argument("--scenario", help="path to a scenario JSON file")
    run.add_argument(
        "--mode",
        choices=["open-loop", "closed-loop", "benchmark"],
        default="closed-loop",
    )
    run.add_argument("--controller", choices=["quad", "to", "hybrid"], default=None)
    run.add_argument("--kernel", choices=["fwd", "cn"], default=None)
    run.add_argument("--grid", choices=["local", "global"], default=None)
    run.add_argument("--rate", type=float, default=10.0, help="control rate [Hz]")
    run.add_argument("--max-sim-time", type=float, default=120.0)
    run.add_argument("--out", default="results")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--log-level", default="WARNING")
    run.set_defaults(func=cmd_run)

    plot = sub.add_parser("plot", help="emit a gnuplot script for a trace CSV")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out-script", default="plot.gp")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    level = str(getattr(args, "log_level", "WARNING")).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    if getattr(args, "seed", None) is not None:
        np.random.seed(args.seed)
    if getattr(args, "rate", 1.0) <= 0:
        print("error: --rate must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI must not crash with a traceback
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
