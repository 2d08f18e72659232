"""
Dual ascent for equality-constrained strongly convex programs.

Contains the inner Lagrangian minimization, time-invariant dual ascent,
its running (correction-only) version and a high-accuracy primal-dual
oracle used to measure tracking errors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .errors import NoConvergence, SingularKKT
from .problem import (
    ConstraintSet,
    PrimalDualState,
    SmoothnessBounds,
    TimeVaryingProblem,
    project_onto_image,
)
from .trajectory import TrajectoryLog

ARMIJO_C = 1e-4
MIN_STEP = 2.0 ** -40


def stepsize_limit(bounds: SmoothnessBounds, cs: ConstraintSet) -> float:
    """Largest dual stepsize with a convergence guarantee, ``2 m / sigma_max**2``."""
    return 2 * bounds.m / cs.sigma_max ** 2


def balanced_stepsize(bounds: SmoothnessBounds, cs: ConstraintSet) -> float:
    """Stepsize minimizing the contraction factor, ``2 / (sigma_max^2/m + sigma_min^2/L)``."""
    return 2.0 / (cs.sigma_max ** 2 / bounds.m + cs.sigma_min_pos ** 2 / bounds.L)


def check_stepsize(alpha, bounds, cs, name="alpha"):
    if alpha >= stepsize_limit(bounds, cs):
        warnings.warn(
            f"{name}={alpha:g} violates {name} < 2m/sigma_max^2 = "
            f"{stepsize_limit(bounds, cs):g}; no convergence guarantee",
            RuntimeWarning,
            stacklevel=3,
        )


def contraction_factor(alpha, bounds: SmoothnessBounds, cs: ConstraintSet) -> float:
    """Per-iteration dual contraction factor of dual ascent with stepsize ``alpha``.

    ``max(|1 - alpha sigma_max^2 / m|, |1 - alpha sigma_min^2 / L|)`` where
    ``sigma_min`` is the smallest positive singular value of ``A``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return max(
        abs(1 - alpha * cs.sigma_max ** 2 / bounds.m),
        abs(1 - alpha * cs.sigma_min_pos ** 2 / bounds.L),
    )


@dataclass(frozen=True)
class DualAscentConfig:
    alpha: float
    max_iters: int = 100
    inner_tol: float = 1e-10
    inner_max_iters: int = 50

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class OracleSolution:
    x_star: np.ndarray
    lambda_star: np.ndarray
    kkt_residual: float


def newton_minimize(grad, hessian, value, shift, x0, tol=1e-10, max_iters=50) -> np.ndarray:
    """Minimize ``g(x) + shift^T x`` by damped Newton with Armijo backtracking.

    ``grad``, ``hessian`` and ``value`` are functions of ``x`` only; ``value``
    may be None, in which case the line search uses the merit
    ``0.5 ||grad||^2``. Steps are halved until the Armijo condition
    (``c = 1e-4``) holds.

    Raises
    ------
    NoConvergence
        If the gradient norm is still above ``tol`` after ``max_iters``
        Newton steps.
    """
    x = np.array(x0, dtype=float)
    r = grad(x) + shift
    rnorm = np.linalg.norm(r)
    for _ in range(max_iters):
        if rnorm <= tol:
            return _polish(grad, hessian, shift, x, r, rnorm)
        d = -np.linalg.solve(np.atleast_2d(hessian(x)), r)
        slope = r @ d
        if value is not None:
            phi = value(x) + shift @ x
        s = 1.0
        while True:
            x_new = x + s * d
            r_new = grad(x_new) + shift
            rnorm_new = np.linalg.norm(r_new)
            if value is not None:
                decrease = ARMIJO_C * s * slope
                ok = value(x_new) + shift @ x_new <= phi + decrease
                # predicted decrease lost in roundoff: accept the step
                ok = ok or abs(decrease) <= 1e-15 * max(1.0, abs(phi))
            else:
                ok = rnorm_new ** 2 <= (1 - 2 * ARMIJO_C * s) * rnorm ** 2
            if ok or s <= MIN_STEP:
                break
            s *= 0.5
        x, r, rnorm = x_new, r_new, rnorm_new
    if rnorm <= tol:
        return _polish(grad, hessian, shift, x, r, rnorm)
    raise NoConvergence(
        f"inner Newton stopped with gradient norm {rnorm:.3e} > {tol:.1e}", residual=rnorm
    )


def _polish(grad, hessian, shift, x, r, rnorm):
    # one full Newton step from inside the quadratic region takes the
    # residual to roundoff level, so results hardly depend on where the
    # tolerance test happened to trigger
    if rnorm == 0:
        return x
    x_new = x - np.linalg.solve(np.atleast_2d(hessian(x)), r)
    return x_new if np.linalg.norm(grad(x_new) + shift) <= rnorm else x


def inner_primal_min(problem: TimeVaryingProblem, lam, t, warm_start=None,
                     tol=1e-10, max_iters=50) -> np.ndarray:
    """Minimize the Lagrangian ``f(x; t) + lam^T A x`` over ``x``.

    Uses :func:`newton_minimize`, warm-started at ``warm_start`` (zeros when
    omitted). The line search uses the Lagrangian value when
    ``problem.value`` is available.
    """
    value = None if problem.value is None else (lambda x: problem.value(x, t))
    x0 = np.zeros(problem.dimension) if warm_start is None else warm_start
    return newton_minimize(
        lambda x: problem.grad(x, t), lambda x: problem.hessian(x, t), value,
        problem.constraints.A.T @ lam, x0, tol, max_iters,
    )


def correction_rounds(problem, x, lam, t, alpha, rounds, tol=1e-10, max_iters=50):
    """Run ``rounds`` dual ascent iterations on ``f(.; t)`` from ``(x, lam)``.

    ``x`` only warm-starts the inner minimization.
    """
    A, b = problem.constraints.A, problem.constraints.b
    for _ in range(rounds):
        x = inner_primal_min(problem, lam, t, x, tol, max_iters)
        lam = lam + alpha * (A @ x - b)
    return x, lam


@dataclass
class DualAscentLog:
    """Iterate history of :func:`dual_ascent`.

    ``lams[i]`` is the dual iterate after ``i`` updates and ``xs[i]`` the
    primal point computed from ``lams[i]``.
    """

    lams: np.ndarray
    xs: np.ndarray
    dual_err: Optional[np.ndarray] = None
    primal_err: Optional[np.ndarray] = None


def dual_ascent(problem: TimeVaryingProblem, t, init: PrimalDualState,
                cfg: DualAscentConfig, oracle: Optional[OracleSolution] = None):
    """Time-invariant dual ascent on the problem sampled at ``t``.

    Alternates ``x <- argmin f(x; t) + lam^T A x`` and
    ``lam <- lam + alpha (A x - b)`` for ``cfg.max_iters`` iterations.

    Parameters
    ----------
    problem : TimeVaryingProblem
    t : float
        Sampling time at which the problem is frozen.
    init : PrimalDualState
        Starting pair. ``init.lam`` is projected onto im(A).
    cfg : DualAscentConfig
    oracle : OracleSolution, optional
        When given, the log records ``||lam_i - lam*||`` and
        ``||x_i - x*||``.

    Returns
    -------
    state : PrimalDualState
    log : DualAscentLog
    """
    cs = problem.constraints
    if cfg.alpha > 0:
        check_stepsize(cfg.alpha, problem.bounds, cs)
    A, b = cs.A, cs.b
    lam = project_onto_image(init.lam, cs)
    x = np.array(init.x, dtype=float)
    lams, xs = [lam], []
    for _ in range(cfg.max_iters):
        x = inner_primal_min(problem, lam, t, x, cfg.inner_tol, cfg.inner_max_iters)
        lam = lam + cfg.alpha * (A @ x - b)
        xs.append(x)
        lams.append(lam)
    log = DualAscentLog(np.array(lams), np.array(xs))
    if oracle is not None:
        log.dual_err = np.linalg.norm(log.lams - oracle.lambda_star, axis=1)
        log.primal_err = np.linalg.norm(log.xs - oracle.x_star, axis=1)
    return PrimalDualState(x, lam, init.k, t), log


def solve_oracle(problem: TimeVaryingProblem, t, tol=1e-11, warm_start=None,
                 max_iters=50) -> OracleSolution:
    """Solve the problem sampled at ``t`` to KKT residual ``<= tol``.

    Primal-dual Newton on the KKT conditions. The Newton system is solved
    in the range space of ``A``: the multiplier step is restricted to
    im(A), which selects the minimum-norm solution of the (possibly
    singular) bordered system, so the returned multiplier is the
    representative lying in im(A).

    Raises
    ------
    NoConvergence
    SingularKKT
        If the reduced system is not numerically positive definite.
    """
    cs = problem.constraints
    A, b, U = cs.A, cs.b, cs.basis
    B = A.T @ U  # n x rank, A^T restricted to im(A)
    if warm_start is None:
        x, lam = np.zeros(problem.dimension), np.zeros(cs.p)
    else:
        x, lam = (np.array(v, dtype=float) for v in warm_start)
        lam = project_onto_image(lam, cs)

    def residual(x, lam):
        return problem.grad(x, t) + A.T @ lam, A @ x - b

    r1, r2 = residual(x, lam)
    res = np.hypot(np.linalg.norm(r1), np.linalg.norm(r2))
    for _ in range(max_iters):
        if res <= tol:
            break
        H = problem.hessian(x, t)
        try:
            Hc = sla.cho_factor(H)
            HiB = sla.cho_solve(Hc, B)
            Hir = sla.cho_solve(Hc, r1)
            S = sla.cho_factor(B.T @ HiB)
        except np.linalg.LinAlgError as exc:
            raise SingularKKT(f"KKT system singular at t={t}") from exc
        # H dx + B dy = -r1, B^T dx = -U^T r2
        dy = sla.cho_solve(S, U.T @ r2 - B.T @ Hir)
        dx = -(Hir + HiB @ dy)
        dlam = U @ dy
        s = 1.0
        while True:
            xn, ln = x + s * dx, lam + s * dlam
            r1n, r2n = residual(xn, ln)
            resn = np.hypot(np.linalg.norm(r1n), np.linalg.norm(r2n))
            if resn <= (1 - ARMIJO_C * s) * res or s <= MIN_STEP:
                break
            s *= 0.5
        if resn >= res and s <= MIN_STEP:
            break
        x, lam, r1, r2, res = xn, ln, r1n, r2n, resn
    if res > tol:
        raise NoConvergence(f"KKT residual {res:.3e} > {tol:.1e} at t={t}", residual=res)
    lam = project_onto_image(lam, cs)
    r1, r2 = residual(x, lam)
    return OracleSolution(x, lam, float(np.hypot(np.linalg.norm(r1), np.linalg.norm(r2))))


@dataclass
class TrajectoryOracle:
    """Cached optimizer trajectory, warm-starting each solve from the last one."""

    problem: TimeVaryingProblem
    tol: float = 1e-11
    _cache: dict = field(default_factory=dict, repr=False)
    _last: Optional[OracleSolution] = field(default=None, repr=False)

    def __call__(self, t) -> OracleSolution:
        key = float(t)
        sol = self._cache.get(key)
        if sol is None:
            warm = None if self._last is None else (self._last.x_star, self._last.lambda_star)
            sol = solve_oracle(self.problem, key, self.tol, warm)
            self._cache[key] = self._last = sol
        return sol

    def errors(self, x, lam, t) -> tuple[float, float]:
        sol = self(t)
        return float(np.linalg.norm(x - sol.x_star)), float(np.linalg.norm(lam - sol.lambda_star))


def _as_oracle(problem, oracle):
    if oracle is None or isinstance(oracle, TrajectoryOracle):
        return oracle
    return TrajectoryOracle(problem, float(oracle))


def running_dual_ascent(problem: TimeVaryingProblem, times, init: PrimalDualState,
                        cfg: DualAscentConfig, oracle=None) -> TrajectoryLog:
    """Correction-only tracking: one dual ascent iteration per sample.

    At each new sample ``t_k`` (``k >= 1``) the Lagrangian of ``f(.; t_k)``
    is minimized at the current multiplier and the multiplier takes one
    ascent step. Row ``k`` of the log holds the pair available at ``t_k``;
    row 0 is ``init``.

    ``oracle`` is either a tolerance or a :class:`TrajectoryOracle`; with
    it the log carries errors against the optimizer trajectory.
    """
    cs = problem.constraints
    if cfg.alpha > 0:
        check_stepsize(cfg.alpha, problem.bounds, cs)
    oracle = _as_oracle(problem, oracle)
    times = np.asarray(times, dtype=float)
    x, lam = np.array(init.x, dtype=float), project_onto_image(init.lam, cs)
    log = TrajectoryLog()

    def record(k, t):
        errs = oracle.errors(x, lam, t) if oracle is not None else (None, None)
        log.append(k, t, x, lam, *errs)

    record(0, times[0])
    for k in range(1, len(times)):
        x, lam = correction_rounds(problem, x, lam, times[k], cfg.alpha, 1,
                                   cfg.inner_tol, cfg.inner_max_iters)
        record(k, times[k])
    return log
