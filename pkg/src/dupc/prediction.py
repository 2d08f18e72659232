"""
Prediction step: extrapolate the primal-dual pair to the next sample.

The prediction solves the equality-constrained quadratic program

    min_dx  0.5 dx^T Q dx + h c^T dx   subject to   A dx = 0,

with ``Q`` the Hessian and ``c`` the (exact or backward-difference) mixed
derivative of the gradient at the current point, either exactly through its
KKT system or approximately with ``P`` dual gradient iterations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .dual import check_stepsize
from .errors import SingularHessian, SingularKKT, ZeroSamplingPeriod
from .problem import PrimalDualState, TimeVaryingProblem, project_onto_image

EXACT_KKT = "exact_kkt"
DUAL_GRADIENT = "dual_gradient"
EXACT = "exact"
BACKWARD_DIFFERENCE = "backward_difference"


@dataclass(frozen=True)
class PredictionConfig:
    beta: float
    P: int
    mode: str = DUAL_GRADIENT
    derivative_mode: str = EXACT

    def __post_init__(self):
        if self.P < 0:
            raise ValueError("P must be >= 0")
        if self.mode not in (EXACT_KKT, DUAL_GRADIENT):
            raise ValueError(f"unknown prediction mode {self.mode!r}")
        if self.derivative_mode not in (EXACT, BACKWARD_DIFFERENCE):
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.mode == DUAL_GRADIENT and self.P > 0 and not self.beta > 0:
            raise ValueError("beta must be positive")


def backward_diff_mixed_grad(problem: TimeVaryingProblem, x_k, t_k, t_km1) -> np.ndarray:
    """First-order backward difference of the gradient in time at fixed ``x_k``.

    ``(grad f(x_k; t_k) - grad f(x_k; t_km1)) / (t_k - t_km1)``.
    """
    h = t_k - t_km1
    if not h > 0:
        raise ZeroSamplingPeriod(f"sampling period must be positive, got {h}")
    return (problem.grad(x_k, t_k) - problem.grad(x_k, t_km1)) / h


def exact_prediction_kkt(problem: TimeVaryingProblem, state: PrimalDualState, h,
                         mixed_grad) -> tuple[np.ndarray, np.ndarray]:
    """Solve the prediction QP exactly through its bordered KKT system.

    The bordered matrix ``[[Q, A^T], [A, 0]]`` is singular when ``A`` is rank
    deficient; the minimum-norm least-squares solution puts the multiplier
    in im(A).

    Returns
    -------
    delta_x, delta_lambda : ndarray
    """
    cs = problem.constraints
    A = cs.A
    n, p = problem.dimension, cs.p
    Q = problem.hessian(state.x, state.t)
    K = np.block([[Q, A.T], [A, np.zeros((p, p))]])
    rhs = np.concatenate([-h * np.asarray(mixed_grad, dtype=float), np.zeros(p)])
    sol, _, rank, _ = sla.lstsq(K, rhs, cond=1e-12)
    if rank < n + cs.rank:
        raise SingularKKT(f"prediction KKT system has rank {rank} < {n + cs.rank}")
    dx, dlam = sol[:n], project_onto_image(sol[n:], cs)
    return dx, dlam


@dataclass
class PredictionLog:
    """Dual iterates ``delta_lambda_p`` and the primal residual ``||A delta_x_p||``."""

    dlams: np.ndarray
    feasibility: np.ndarray


def approx_prediction(problem: TimeVaryingProblem, state: PrimalDualState, h, mixed_grad,
                      cfg: PredictionConfig, record=False):
    """Approximate the prediction QP with ``cfg.P`` dual gradient iterations.

    Starting from ``delta_lambda = 0``, each round solves the unconstrained
    quadratic ``Q dx = -(h c + A^T dlam)`` and updates
    ``dlam <- dlam + beta A dx``. ``Q`` is factorized once per call.

    Returns
    -------
    delta_x, delta_lambda : ndarray
    log : PredictionLog or None
        Only when ``record`` is true.
    """
    cs = problem.constraints
    A = cs.A
    dx = np.zeros(problem.dimension)
    dlam = np.zeros(cs.p)
    dlams, feas = [dlam], []
    if cfg.P > 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            try:
                Qc = sla.cho_factor(problem.hessian(state.x, state.t))
            except np.linalg.LinAlgError as exc:
                raise SingularHessian("Hessian is not positive definite") from exc
        hc = h * np.asarray(mixed_grad, dtype=float)
        for _ in range(cfg.P):
            dx = -sla.cho_solve(Qc, hc + A.T @ dlam, check_finite=False)
            Adx = A @ dx
            dlam = dlam + cfg.beta * Adx
            if record:
                dlams.append(dlam)
                feas.append(np.linalg.norm(Adx))
    log = PredictionLog(np.array(dlams), np.array(feas)) if record else None
    return dx, dlam, log


def mixed_gradient(problem: TimeVaryingProblem, x, t, t_prev, derivative_mode):
    """Mixed derivative for the prediction at ``(x, t)``.

    Returns ``None`` when a backward difference is requested but no earlier
    sample exists (``t_prev is None``); the caller then skips prediction.
    """
    if derivative_mode == EXACT:
        if problem.mixed_grad is None:
            raise ValueError(
                "problem has no mixed_grad oracle; use derivative_mode='backward_difference'"
            )
        return problem.mixed_grad(x, t)
    if t_prev is None:
        return None
    return backward_diff_mixed_grad(problem, x, t, t_prev)


def predict(problem: TimeVaryingProblem, state: PrimalDualState, h, t_prev,
            cfg: PredictionConfig) -> tuple[np.ndarray, np.ndarray]:
    """Prediction increments for ``state``, per ``cfg``.

    Zero increments when ``P == 0`` in dual-gradient mode, or on the first
    sample in backward-difference mode.
    """
    zeros = np.zeros(problem.dimension), np.zeros(problem.constraints.p)
    if cfg.mode == DUAL_GRADIENT and cfg.P == 0:
        return zeros
    c = mixed_gradient(problem, state.x, state.t, t_prev, cfg.derivative_mode)
    if c is None:
        return zeros
    if cfg.mode == EXACT_KKT:
        return exact_prediction_kkt(problem, state, h, c)
    dx, dlam, _ = approx_prediction(problem, state, h, c, cfg)
    return dx, dlam


def check_prediction_stepsize(cfg: PredictionConfig, problem: TimeVaryingProblem):
    if cfg.mode == DUAL_GRADIENT and cfg.P > 0:
        check_stepsize(cfg.beta, problem.bounds, problem.constraints, name="beta")
