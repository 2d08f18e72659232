"""Command-line front end: ``dupc <subcommand> [--config FILE] ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from .bench import (
    COMPARE_COLUMNS,
    FAILED,
    RunSpec,
    SweepSpec,
    _from_dict,
    calibrate,
    compare_budgeted,
    default_stepsizes,
    run_single,
    run_sweep,
    slopes,
    write_rows,
)
from .bounds import BACKWARD_DIFFERENCE as BOUND_BD
from .bounds import EXACT_DERIVATIVE, bound_report
from .distributed import random_connected_graph, write_edge_list
from .dual import contraction_factor
from .errors import ConfigError, DupcError
from .prediction import BACKWARD_DIFFERENCE
from .scenarios import Scenario, as_problem, generate_scenario, stream
from .tracker import RuntimeBudget

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

SECTIONS = ("scenario", "run", "sweep", "budget", "compare")


@dataclasses.dataclass(frozen=True)
class CompareSpec:
    h_values: tuple = (0.08, 0.16, 0.32, 0.64)
    k_max: int = 1000
    tail_fraction: float = 0.5
    derivative_mode: str = "exact"


def default_config() -> dict:
    """The complete configuration with every default filled in."""
    return {
        "scenario": Scenario().to_dict(),
        "run": RunSpec().to_dict(),
        "sweep": SweepSpec().to_dict(),
        "budget": dataclasses.asdict(RuntimeBudget()),
        "compare": {k: list(v) if isinstance(v, tuple) else v
                    for k, v in dataclasses.asdict(CompareSpec()).items()},
    }


def load_config(path, seed=None):
    """Merge a JSON config file over the defaults and build the section objects."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict) or set(user) - set(SECTIONS):
            raise ConfigError(f"config must be an object with sections {list(SECTIONS)}")
        for section, values in user.items():
            if not isinstance(values, dict):
                raise ConfigError(f"section {section!r} must be an object")
            cfg[section].update(values)
    if seed is not None:
        cfg["scenario"]["seed"] = seed
        cfg["sweep"]["seeds"] = [seed]
    try:
        scenario = Scenario.from_dict(cfg["scenario"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc
    return {
        "scenario": scenario,
        "run": RunSpec.from_dict(cfg["run"]),
        "sweep": SweepSpec.from_dict(cfg["sweep"]),
        "budget": _from_dict(RuntimeBudget, cfg["budget"], "budget"),
        "compare": _from_dict(CompareSpec, cfg["compare"], "compare"),
    }


def _out_path(args, name):
    if args.out_dir is None:
        return None
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _emit(args, name, text):
    path = _out_path(args, name)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {path}")


def cmd_config(args, _):
    if not args.defaults:
        raise ConfigError("use 'dupc config --defaults'")
    print(json.dumps(default_config(), indent=2))
    return EXIT_OK


def cmd_analyze(args, conf):
    run = conf["run"]
    problem = as_problem(generate_scenario(conf["scenario"]))
    alpha, beta = default_stepsizes(problem, run.alpha, run.beta)
    bounds, cs = problem.bounds, problem.constraints
    report = bound_report(
        bounds, cs, run.h,
        rho_P=contraction_factor(beta, bounds, cs), rho_C=contraction_factor(alpha, bounds, cs),
        P=run.P, C=run.C, C_extra=run.C_extra, C_total=run.C_total,
        mode=BOUND_BD if run.derivative_mode == BACKWARD_DIFFERENCE else EXACT_DERIVATIVE,
    )
    print(report.to_text())
    print()
    print(json.dumps({k: (v if not isinstance(v, float) or math.isfinite(v) else str(v))
                      for k, v in report.as_dict().items()}, indent=2))
    return EXIT_OK


def cmd_run(args, conf):
    log, comm = run_single(conf["scenario"], conf["run"])
    _emit(args, "trajectory.csv", log.to_csv())
    if comm is not None and args.out_dir is not None:
        comm.to_csv(_out_path(args, "comm_budget.csv"))
    if log.has_errors:
        ep, ed = log.steady_state_error(conf["run"].tail_fraction)
        print(f"steady-state error: primal {ep:.6e}, dual {ed:.6e}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args, conf):
    result = run_sweep(conf["scenario"], conf["sweep"], threads=args.threads,
                       out_dir=args.out_dir, budget=conf["budget"])
    if args.out_dir is None:
        sys.stdout.write(result.to_csv())
    else:
        print(f"wrote {os.path.join(args.out_dir, 'summary.csv')}")
    for (strategy, P, seed), (slope, _, r2) in sorted(slopes(result.rows).items()):
        print(f"slope {strategy} P={P} seed={seed}: {slope:.4f} (r2 {r2:.4f})", file=sys.stderr)
    return EXIT_FAILED if result.failed else EXIT_OK


def cmd_compare(args, conf):
    cmp = conf["compare"]
    rows = compare_budgeted(conf["scenario"], conf["budget"], cmp.h_values, k_max=cmp.k_max,
                            tail_fraction=cmp.tail_fraction, derivative_mode=cmp.derivative_mode,
                            threads=args.threads)
    _emit(args, "compare.csv", write_rows(rows, COMPARE_COLUMNS))
    return EXIT_FAILED if any(r["status"] == FAILED for r in rows) else EXIT_OK


def cmd_graph_gen(args, conf):
    sc = conf["scenario"]
    N = args.nodes if args.nodes is not None else sc.N
    degree = args.degree if args.degree is not None else sc.expected_degree
    graph = random_connected_graph(N, degree, stream(sc.seed, 0))
    _emit(args, "graph.txt", write_edge_list(graph))
    return EXIT_OK


def cmd_calibrate(args, conf):
    budget = calibrate(conf["scenario"])
    _emit(args, "budget.json", json.dumps({"budget": dataclasses.asdict(budget)}, indent=2) + "\n")
    return EXIT_OK


COMMANDS = {
    "analyze": (cmd_analyze, "print the bound report for the run section"),
    "run": (cmd_run, "track one trajectory and write its CSV"),
    "sweep": (cmd_sweep, "sweep sampling periods and strategies"),
    "compare-budget": (cmd_compare, "compare strategies under a runtime budget"),
    "graph-gen": (cmd_graph_gen, "write a random connected graph as an edge list"),
    "config": (cmd_config, "print configuration defaults"),
    "calibrate": (cmd_calibrate, "measure per-operation times and write a budget section"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out-dir", help="directory for output files (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser = argparse.ArgumentParser(prog="dupc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "config":
            p.add_argument("--defaults", action="store_true", help="print all defaults as JSON")
        if name == "graph-gen":
            p.add_argument("--nodes", type=int)
            p.add_argument("--degree", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    fn = COMMANDS[args.command][0]
    try:
        conf = None if args.command == "config" else load_config(args.config, args.seed)
        return fn(args, conf)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DupcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
