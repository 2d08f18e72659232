"""
Trackers for time-varying problems.

``run_adupc`` is approximate dual prediction-correction; ``run_baseline``
covers the correction-only strategies it is compared against. All of them
sample the problem every ``h`` seconds, starting at ``t0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dual import TrajectoryOracle, check_stepsize, correction_rounds
from .errors import NoConvergence
from .prediction import (
    DUAL_GRADIENT,
    EXACT,
    PredictionConfig,
    check_prediction_stepsize,
    predict,
)
from .problem import PrimalDualState, TimeVaryingProblem, project_onto_image, zero_state
from .trajectory import TrajectoryLog

ADUPC = "adupc"
CORRECTION_ONLY = "correction_only"
CORRECTION_PLUS_EXTRA = "correction_plus_extra"
TOTAL_CORRECTION = "total_correction"
STRATEGIES = (ADUPC, CORRECTION_ONLY, CORRECTION_PLUS_EXTRA, TOTAL_CORRECTION)


@dataclass(frozen=True)
class TrackerConfig:
    """Stepsizes, iteration budgets and sampling for a tracking run.

    ``C_total`` is the single correction budget of the total-correction
    strategy; the other strategies ignore it.
    """

    alpha: float
    h: float
    k_max: int
    beta: float = 0.0
    P: int = 0
    C: int = 1
    C_extra: int = 0
    C_total: Optional[int] = None
    strategy: str = ADUPC
    derivative_mode: str = EXACT
    prediction_mode: str = DUAL_GRADIENT
    t0: float = 0.0
    inner_tol: float = 1e-10
    inner_max_iters: int = 50

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if min(self.P, self.C, self.C_extra) < 0:
            raise ValueError("iteration budgets must be nonnegative")
        if self.strategy == TOTAL_CORRECTION and self.C_total is None:
            raise ValueError("total_correction needs C_total")

    @property
    def prediction(self) -> PredictionConfig:
        return PredictionConfig(self.beta, self.P, self.prediction_mode, self.derivative_mode)

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.k_max + 1) * self.h

    def meta(self) -> dict:
        P = self.P if self.strategy == ADUPC else 0
        C = self.C_total if self.strategy == TOTAL_CORRECTION else self.C
        C_extra = self.C_extra if self.strategy == CORRECTION_PLUS_EXTRA else 0
        return {"strategy": self.strategy, "P": P, "C": C, "C_extra": C_extra}


def _prepare(problem, cfg, init, oracle_tol, oracle):
    if init is None:
        init = zero_state(problem, cfg.t0)
    if oracle is None and oracle_tol is not None:
        oracle = TrajectoryOracle(problem, oracle_tol)
    x = np.array(init.x, dtype=float)
    lam = project_onto_image(init.lam, problem.constraints)
    if cfg.alpha > 0:
        check_stepsize(cfg.alpha, problem.bounds, problem.constraints)
    return x, lam, oracle


def _record(log, oracle, k, t, x, lam):
    errs = oracle.errors(x, lam, t) if oracle is not None else (None, None)
    log.append(k, t, x, lam, *errs)


def run_adupc(problem: TimeVaryingProblem, cfg: TrackerConfig,
              init: Optional[PrimalDualState] = None, oracle_tol=None,
              oracle: Optional[TrajectoryOracle] = None) -> TrajectoryLog:
    """Track the optimizer trajectory with dual prediction-correction.

    For ``k = 0 .. k_max - 1``: predict the increments of the pair from
    ``(x_k, lambda_k)`` on ``f(.; t_k)``, then run ``cfg.C`` dual ascent
    corrections on ``f(.; t_{k+1})`` starting from the predicted pair.

    Parameters
    ----------
    problem : TimeVaryingProblem
    cfg : TrackerConfig
        ``cfg.strategy`` is ignored; the run is always prediction-correction.
    init : PrimalDualState, optional
        Defaults to zeros at ``cfg.t0``. The multiplier is projected onto
        im(A).
    oracle_tol : float, optional
        Attach per-sample errors against :func:`solve_oracle` solutions.
    oracle : TrajectoryOracle, optional
        A shared (cached) oracle; overrides ``oracle_tol``.

    Returns
    -------
    TrajectoryLog
        ``k_max + 1`` rows; row 0 is the initial pair.
    """
    cfg = replace(cfg, strategy=ADUPC)
    pcfg = cfg.prediction
    check_prediction_stepsize(pcfg, problem)
    x, lam, oracle = _prepare(problem, cfg, init, oracle_tol, oracle)
    times = cfg.times()
    log = TrajectoryLog(meta=cfg.meta())
    _record(log, oracle, 0, times[0], x, lam)
    for k in range(cfg.k_max):
        t_k, t_next = times[k], times[k + 1]
        t_prev = times[k - 1] if k > 0 else None
        try:
            dx, dlam = predict(problem, PrimalDualState(x, lam, k, t_k), cfg.h, t_prev, pcfg)
            x, lam = correction_rounds(problem, x + dx, lam + dlam, t_next, cfg.alpha,
                                       cfg.C, cfg.inner_tol, cfg.inner_max_iters)
        except NoConvergence as exc:
            raise NoConvergence(str(exc), exc.residual, step=k) from exc
        _record(log, oracle, k + 1, t_next, x, lam)
    return log


def run_baseline(problem: TimeVaryingProblem, cfg: TrackerConfig,
                 init: Optional[PrimalDualState] = None, oracle_tol=None,
                 oracle: Optional[TrajectoryOracle] = None) -> TrajectoryLog:
    """Track with a correction-only strategy.

    * ``correction_only``: ``C`` corrections per sample.
    * ``correction_plus_extra``: ``C`` corrections, the delivered pair is
      logged, then ``C_extra`` more corrections on the same sample.
    * ``total_correction``: ``C_total`` corrections per sample.
    """
    if cfg.strategy == ADUPC:
        raise ValueError("run_baseline does not run the adupc strategy")
    x, lam, oracle = _prepare(problem, cfg, init, oracle_tol, oracle)
    C = cfg.C_total if cfg.strategy == TOTAL_CORRECTION else cfg.C
    extra = cfg.C_extra if cfg.strategy == CORRECTION_PLUS_EXTRA else 0
    times = cfg.times()
    log = TrajectoryLog(meta=cfg.meta())
    _record(log, oracle, 0, times[0], x, lam)
    for k in range(cfg.k_max):
        t_next = times[k + 1]
        try:
            x, lam = correction_rounds(problem, x, lam, t_next, cfg.alpha, C,
                                       cfg.inner_tol, cfg.inner_max_iters)
            _record(log, oracle, k + 1, t_next, x, lam)
            if extra:
                x, lam = correction_rounds(problem, x, lam, t_next, cfg.alpha, extra,
                                           cfg.inner_tol, cfg.inner_max_iters)
        except NoConvergence as exc:
            raise NoConvergence(str(exc), exc.residual, step=k) from exc
    return log


def run_tracker(problem, cfg: TrackerConfig, init=None, oracle_tol=None, oracle=None):
    """Dispatch on ``cfg.strategy``."""
    run = run_adupc if cfg.strategy == ADUPC else run_baseline
    return run(problem, cfg, init, oracle_tol, oracle)


@dataclass(frozen=True)
class RuntimeBudget:
    """Fractions of the sampling period and per-operation wall times (seconds).

    ``r1 h`` is spent on corrections, ``r2 h`` on prediction or extra
    corrections. A prediction phase costs ``t_bar + P t_P``, a correction
    ``t_C``.
    """

    r1: float = 0.5
    r2: float = 0.5
    t_C: float = 0.021
    t_P: float = 0.003
    t_bar: float = 0.008

    def __post_init__(self):
        if not (0 < self.r1 <= 1 and 0 <= self.r2 <= 1):
            raise ValueError("r1 must be in (0, 1] and r2 in [0, 1]")
        if self.r1 + self.r2 > 1 + 1e-12:
            raise ValueError("r1 + r2 must not exceed 1")
        if min(self.t_C, self.t_P, self.t_bar) <= 0:
            raise ValueError("operation times must be positive")


def _ffloor(x):
    # guards floors of ratios that are integers up to roundoff
    return math.floor(x + 1e-9)


def compute_budget(budget: RuntimeBudget, h) -> tuple[int, int, int, int]:
    """Affordable iteration counts for sampling period ``h``.

    Returns
    -------
    C, P, C_extra, C_total : int
        Corrections in ``r1 h``; predictions in ``r2 h`` after the fixed
        cost ``t_bar`` (clamped at 0); extra corrections in ``r2 h``; and
        corrections filling the whole period.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    C = _ffloor(budget.r1 * h / budget.t_C)
    P = max(0, _ffloor((budget.r2 * h - budget.t_bar) / budget.t_P))
    C_extra = _ffloor(budget.r2 * h / budget.t_C)
    C_total = _ffloor(h / budget.t_C)
    return C, P, C_extra, C_total
