"""
Benchmark harness: sampling-period sweeps, budgeted strategy comparisons,
log-log slope fits and runtime calibration.

Cells of a sweep are independent; each one regenerates its scenario from the
seed, so results do not depend on the execution order or the thread count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .bounds import BACKWARD_DIFFERENCE as BOUND_BD
from .bounds import EXACT_DERIVATIVE, asymptotic_errors, baseline_error_bounds, drift_constant_K
from .distributed import LiftedProblem, simulate_distributed_adupc
from .dual import balanced_stepsize, contraction_factor, correction_rounds
from .errors import ConfigError, DegenerateFit, DupcError, NotContractive
from .prediction import BACKWARD_DIFFERENCE, DUAL_GRADIENT, EXACT, PredictionConfig, approx_prediction
from .problem import zero_state
from .scenarios import Scenario, as_problem, generate_scenario
from .tracker import (
    ADUPC,
    CORRECTION_ONLY,
    CORRECTION_PLUS_EXTRA,
    STRATEGIES,
    TOTAL_CORRECTION,
    RuntimeBudget,
    TrackerConfig,
    compute_budget,
    run_tracker,
)

OK = "ok"
FAILED = "failed"
FLAGGED = "below_oracle_resolution"
INFEASIBLE = "infeasible"

# an error is only trusted when it exceeds the oracle accuracy by this factor
ORACLE_MARGIN = 100.0

SUMMARY_COLUMNS = ["h", "strategy", "P", "C", "steady_state_err_primal", "steady_state_err_dual",
                   "C_extra", "derivative_mode", "seed", "status", "message"]


@dataclass(frozen=True)
class SweepSpec:
    """Grid of runs over sampling periods, strategies and prediction budgets.

    ``P_values`` applies to the adupc strategy only. With
    ``C_policy="budget"`` the budgets come from :func:`compute_budget` at
    each ``h`` and ``C``, ``C_extra``, ``C_total`` and ``P_values`` are
    ignored. ``C_total`` defaults to ``2 C``. ``alpha``/``beta`` default to
    the balanced stepsize.
    ``tail_fraction`` is the share of samples (after burn-in) entering the
    steady-state error.
    """

    h_values: tuple = (0.05, 0.1, 0.2, 0.4)
    strategies: tuple = (CORRECTION_ONLY, ADUPC)
    P_values: tuple = (27,)
    C: int = 3
    C_extra: int = 0
    C_total: Optional[int] = None
    C_policy: str = "fixed"
    k_max: int = 2000
    tail_fraction: float = 0.5
    seeds: tuple = (0,)
    alpha: Optional[float] = None
    beta: Optional[float] = None
    derivative_mode: str = EXACT
    prediction_mode: str = DUAL_GRADIENT
    oracle_tol: float = 1e-11

    def __post_init__(self):
        hs = tuple(float(h) for h in self.h_values)
        object.__setattr__(self, "h_values", hs)
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "P_values", tuple(int(p) for p in self.P_values))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not hs or any(h <= 0 for h in hs):
            raise ConfigError("h_values must be nonempty and positive")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ConfigError("h_values must be strictly increasing")
        bad = set(self.strategies) - set(STRATEGIES)
        if bad:
            raise ConfigError(f"unknown strategies {sorted(bad)}")
        if self.C_policy not in ("fixed", "budget"):
            raise ConfigError("C_policy must be 'fixed' or 'budget'")
        if not 0 < self.tail_fraction <= 1:
            raise ConfigError("tail_fraction must be in (0, 1]")
        if self.k_max < 1 or not self.seeds:
            raise ConfigError("k_max must be positive and seeds nonempty")
        if self.derivative_mode not in (EXACT, BACKWARD_DIFFERENCE):
            raise ConfigError(f"unknown derivative_mode {self.derivative_mode!r}")
        if not self.oracle_tol > 0:
            raise ConfigError("oracle_tol must be positive")

    @classmethod
    def from_dict(cls, d) -> "SweepSpec":
        return _from_dict(cls, d, "sweep")

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))


def _from_dict(cls, d, what):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {what} fields {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def _jsonable(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass(frozen=True)
class Cell:
    h: float
    strategy: str
    P: int
    C: int
    C_extra: int
    C_total: Optional[int]
    seed: int

    def sort_key(self):
        return (self.h, self.strategy, self.P, self.seed)

    def label(self) -> str:
        return f"h{self.h!r}_{self.strategy}_P{self.P}_C{self.C}_seed{self.seed}"


@dataclass
class SweepResult:
    rows: list
    logs: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(r["status"] == FAILED for r in self.rows)

    def to_csv(self, path=None) -> str:
        return write_rows(self.rows, SUMMARY_COLUMNS, path)


def write_rows(rows, columns, path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else ("" if v is None else v)
                    for k, v in row.items()})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def default_stepsizes(problem, alpha=None, beta=None):
    a = balanced_stepsize(problem.bounds, problem.constraints)
    return (a if alpha is None else alpha), (a if beta is None else beta)


def _cells(sweep: SweepSpec, budget: RuntimeBudget):
    cells = []
    for h in sweep.h_values:
        if sweep.C_policy == "budget":
            C, P, C_extra, C_total = compute_budget(budget, h)
            P_values = (P,)
        else:
            C, C_extra, C_total, P_values = sweep.C, sweep.C_extra, sweep.C_total, sweep.P_values
        for strategy in sweep.strategies:
            for P in (P_values if strategy == ADUPC else (0,)):
                for seed in sweep.seeds:
                    cells.append(Cell(h, strategy, P, C, C_extra,
                                      C_total if C_total is not None else 2 * C, seed))
    return cells


def run_cell(scenario: Scenario, sweep: SweepSpec, cell: Cell):
    """Run one sweep cell on a fresh copy of the scenario.

    Returns the summary row and the trajectory log (None on failure).
    """
    row = {"h": cell.h, "strategy": cell.strategy, "P": cell.P,
           "C": cell.C_total if cell.strategy == TOTAL_CORRECTION else cell.C,
           "C_extra": cell.C_extra if cell.strategy == CORRECTION_PLUS_EXTRA else 0,
           "derivative_mode": sweep.derivative_mode, "seed": cell.seed,
           "steady_state_err_primal": None, "steady_state_err_dual": None,
           "status": OK, "message": ""}
    if row["C"] < 1:
        row.update(status=INFEASIBLE, message="no correction fits in the sampling period")
        return row, None
    try:
        problem = as_problem(generate_scenario(dataclasses.replace(scenario, seed=cell.seed)))
        alpha, beta = default_stepsizes(problem, sweep.alpha, sweep.beta)
        cfg = TrackerConfig(
            alpha=alpha, beta=beta, h=cell.h, k_max=sweep.k_max, P=cell.P, C=cell.C,
            C_extra=cell.C_extra, C_total=cell.C_total, strategy=cell.strategy,
            derivative_mode=sweep.derivative_mode, prediction_mode=sweep.prediction_mode,
        )
        log = run_tracker(problem, cfg, oracle_tol=sweep.oracle_tol)
    except (DupcError, ValueError, np.linalg.LinAlgError) as exc:
        row.update(status=FAILED, message=f"{type(exc).__name__}: {exc}")
        return row, None
    ep, ed = log.steady_state_error(sweep.tail_fraction)
    row.update(steady_state_err_primal=ep, steady_state_err_dual=ed)
    if not (np.isfinite(ep) and np.isfinite(ed)):
        row.update(status=FAILED, message="iterates diverged")
        return row, log
    # primal oracle error is at most oracle_tol / m
    resolution = ORACLE_MARGIN * sweep.oracle_tol / problem.bounds.m
    if not ep >= resolution:
        row.update(status=FLAGGED,
                   message=f"error below {ORACLE_MARGIN:g}x oracle accuracy ({resolution:.1e})")
    return row, log


def _sort_rows(rows):
    return sorted(rows, key=lambda r: (r["h"], r["strategy"], r["P"], r["seed"]))


def run_sweep(scenario: Scenario, sweep: SweepSpec, threads=1, out_dir=None,
              budget: Optional[RuntimeBudget] = None) -> SweepResult:
    """Run every cell of ``sweep`` and collect one summary row per cell.

    Failures are recorded in the row's ``status``/``message`` and the
    sweep continues. Rows are sorted by ``(h, strategy, P, seed)``. When
    ``out_dir`` is given, ``summary.csv`` and one trajectory CSV per
    successful cell are written there.
    """
    cells = _cells(sweep, budget or RuntimeBudget())
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(lambda c: run_cell(scenario, sweep, c), cells))
    rows, logs = [], {}
    for cell, (row, log) in sorted(zip(cells, results), key=lambda cr: cr[0].sort_key()):
        rows.append(row)
        if log is not None:
            logs[cell.label()] = log
    result = SweepResult(_sort_rows(rows), logs)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.to_csv(os.path.join(out_dir, "summary.csv"))
        for label, log in logs.items():
            log.to_csv(os.path.join(out_dir, f"run_{label}.csv"))
    return result


@dataclass(frozen=True)
class RunSpec:
    """A single tracking run; ``distributed`` uses the node-level simulator."""

    h: float = 0.1
    strategy: str = ADUPC
    P: int = 27
    C: int = 3
    C_extra: int = 0
    C_total: Optional[int] = None
    k_max: int = 2000
    tail_fraction: float = 0.5
    alpha: Optional[float] = None
    beta: Optional[float] = None
    derivative_mode: str = EXACT
    prediction_mode: str = DUAL_GRADIENT
    oracle_tol: Optional[float] = 1e-11
    distributed: bool = False

    @classmethod
    def from_dict(cls, d) -> "RunSpec":
        return _from_dict(cls, d, "run")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def tracker_config(self, problem) -> TrackerConfig:
        alpha, beta = default_stepsizes(problem, self.alpha, self.beta)
        try:
            return TrackerConfig(
                alpha=alpha, beta=beta, h=self.h, k_max=self.k_max, P=self.P, C=self.C,
                C_extra=self.C_extra, C_total=self.C_total, strategy=self.strategy,
                derivative_mode=self.derivative_mode, prediction_mode=self.prediction_mode,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid run: {exc}") from exc


def run_single(scenario: Scenario, spec: RunSpec):
    """Run one trajectory; returns ``(TrajectoryLog, CommBudgetLog or None)``."""
    built = generate_scenario(scenario)
    problem = as_problem(built)
    cfg = spec.tracker_config(problem)
    if spec.distributed:
        if not isinstance(built, LiftedProblem):
            raise ConfigError("distributed runs need a consensus scenario")
        if spec.strategy != ADUPC:
            raise ConfigError("distributed runs use the adupc strategy")
        return simulate_distributed_adupc(built, cfg, oracle_tol=spec.oracle_tol)
    return run_tracker(problem, cfg, oracle_tol=spec.oracle_tol), None


def fit_slope(points) -> tuple[float, float, float]:
    """Least-squares line through ``(log h, log err)``.

    Returns
    -------
    slope, intercept, r2 : float

    Raises
    ------
    DegenerateFit
        If every error is below 1e-14.
    ValueError
        With fewer than 3 points or nonpositive values.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 (h, err) points")
    h, err = pts.T
    if np.all(err < 1e-14):
        raise DegenerateFit("all errors are numerically zero")
    if np.any(h <= 0) or np.any(err <= 0):
        raise ValueError("h and err must be positive")
    fit = stats.linregress(np.log(h), np.log(err))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)


def slopes(rows, column="steady_state_err_primal") -> dict:
    """Slope fit per ``(strategy, P, seed)`` group of successful summary rows."""
    groups: dict = {}
    for r in rows:
        if r["status"] == OK:
            groups.setdefault((r["strategy"], r["P"], r["seed"]), []).append((r["h"], r[column]))
    out = {}
    for key, pts in groups.items():
        try:
            out[key] = fit_slope(sorted(pts))
        except (ValueError, DegenerateFit):
            continue
    return out


COMPARE_COLUMNS = ["h", "P", "C", "C_extra", "C_total", "err_adupc", "err_correction_plus_extra",
                   "err_total_correction", "bound_err_pc", "bound_err_cec", "bound_err_tc",
                   "status", "message"]


def compare_budgeted(scenario: Scenario, budget: RuntimeBudget, h_values, k_max=2000,
                     tail_fraction=0.5, alpha=None, beta=None, derivative_mode=EXACT,
                     oracle_tol=1e-11, threads=1) -> list[dict]:
    """Compare the three strategies under a fixed runtime budget per sample.

    For each ``h`` the budgets ``(C, P, C', C'')`` come from
    :func:`compute_budget`; adupc runs with ``(P, C)``,
    correction_plus_extra with ``(C, C')`` and total_correction with ``C''``.
    The bound columns evaluate the corresponding asymptotic primal error
    formulas with the scenario constants (``inf`` where the
    prediction-correction bound does not exist). Rows with ``C = 0`` are
    marked infeasible.
    """
    sweep = SweepSpec(h_values=tuple(h_values), strategies=(ADUPC, CORRECTION_PLUS_EXTRA,
                                                             TOTAL_CORRECTION),
                      C_policy="budget", k_max=k_max, tail_fraction=tail_fraction,
                      alpha=alpha, beta=beta, derivative_mode=derivative_mode,
                      oracle_tol=oracle_tol, seeds=(scenario.seed,))
    result = run_sweep(scenario, sweep, threads=threads, budget=budget)
    problem = as_problem(generate_scenario(scenario))
    a, b = default_stepsizes(problem, alpha, beta)
    bounds, cs = problem.bounds, problem.constraints
    rho_C, rho_P = contraction_factor(a, bounds, cs), contraction_factor(b, bounds, cs)
    mode = BOUND_BD if derivative_mode == BACKWARD_DIFFERENCE else EXACT_DERIVATIVE
    out = []
    for h in sweep.h_values:
        C, P, C_extra, C_total = compute_budget(budget, h)
        row = {"h": h, "P": P, "C": C, "C_extra": C_extra, "C_total": C_total,
               "status": OK, "message": ""}
        by_strategy = {r["strategy"]: r for r in result.rows if r["h"] == h}
        for strategy, r in by_strategy.items():
            row[f"err_{strategy}"] = r["steady_state_err_primal"]
            if r["status"] != OK and row["status"] in (OK, FLAGGED):
                row.update(status=r["status"], message=f"{strategy}: {r['message']}")
        if C < 1:
            row.update(status=INFEASIBLE, message="C = 0: no correction fits in r1 h")
        else:
            K = drift_constant_K(bounds, cs, h)
            try:
                _, pc = asymptotic_errors(mode, rho_P, rho_C, P, C, bounds, cs, h)
            except NotContractive:
                pc = math.inf
            cec, tc, _ = baseline_error_bounds(rho_C, C, C_extra, C_total, K, cs, bounds.m)
            row.update(bound_err_pc=pc, bound_err_cec=cec, bound_err_tc=tc)
        out.append(row)
    return out


def calibrate(scenario: Scenario, repeats=20, h=0.1) -> RuntimeBudget:
    """Measure per-operation wall times on ``scenario`` and return a budget.

    ``t_C`` is the time of one correction round, ``t_P`` of one prediction
    round and ``t_bar`` the fixed prediction overhead (Hessian, mixed
    gradient, factorization). The result is platform dependent.
    """
    problem = as_problem(generate_scenario(scenario))
    alpha, beta = default_stepsizes(problem)
    state = zero_state(problem, 0.0)
    c = problem.mixed_grad(state.x, 0.0)

    def clock(fn):
        best = math.inf
        for _ in range(repeats):
            start = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - start)
        return best

    t_C = clock(lambda: correction_rounds(problem, state.x, state.lam, h, alpha, 1))
    t0 = clock(lambda: approx_prediction(problem, state, h, c, PredictionConfig(beta, 1)))
    t10 = clock(lambda: approx_prediction(problem, state, h, c, PredictionConfig(beta, 11)))
    t_P = max((t10 - t0) / 10, 1e-9)
    t_bar = max(t0 - t_P, 1e-9)
    return RuntimeBudget(t_C=t_C, t_P=t_P, t_bar=t_bar)
