"""
Closed-form constants and error bounds for dual tracking methods.

All functions are pure. Notation: ``kf = L/m``, ``kA = sigma_max/sigma_min``
with ``sigma_min`` the smallest positive singular value of ``A``;
``rho_P``/``rho_C`` are the dual contraction factors of the prediction and
correction phases.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .errors import NotContractive
from .problem import ConstraintSet, SmoothnessBounds

EXACT_DERIVATIVE = "exact_derivative"
BACKWARD_DIFFERENCE = "backward_difference"


def drift_bounds(bounds: SmoothnessBounds, cs: ConstraintSet, h) -> tuple[float, float]:
    """Per-sample bounds on the movement of the primal and dual optimizers."""
    kf, kA = bounds.kappa_f, cs.kappa_A
    primal = (kf * kA ** 2 + 1) / bounds.m * bounds.C0 * h
    dual = kf * kA / cs.sigma_min_pos * bounds.C0 * h
    return primal, dual


def drift_constant_K(bounds: SmoothnessBounds, cs: ConstraintSet, h) -> float:
    kf, kA = bounds.kappa_f, cs.kappa_A
    return max((kf * kA ** 2 + 1) / bounds.m, kf * kA / cs.sigma_min_pos) * bounds.C0 * h


def deltas(bounds: SmoothnessBounds, cs: ConstraintSet) -> tuple[float, float, float, float]:
    """Problem-specific quantities ``(D1, D2, D3, D4)`` entering the error analysis."""
    kf, kA = bounds.kappa_f, cs.kappa_A
    C0, C1, C2, C3 = bounds.C0, bounds.C1, bounds.C2, bounds.C3
    d1 = (kf * kA ** 2 + 1) / bounds.m
    d2 = kf * kA / cs.sigma_min_pos
    d3 = C1 * C0 ** 2 * d1 ** 2 / 2 + d1 * C2 * C0 + C3 / 2
    d4 = d1 * C1 * C0 + C2
    return d1, d2, d3, d4


def delta3_tilde(delta3, C3, h) -> float:
    """``D3`` enlarged by the backward-difference error, ``D3 + h C3 / 2``."""
    return delta3 + h * C3 / 2


@dataclass(frozen=True)
class Conditions:
    gamma1: float
    gamma2: float
    h_max: float

    @property
    def contractive(self) -> bool:
        return self.gamma1 < 1


def convergence_conditions(rho_P, rho_C, P, C, bounds: SmoothnessBounds,
                           cs: ConstraintSet) -> Conditions:
    """Contraction constants of prediction-correction.

    ``gamma1 = rho_C^C (2 rho_P^P + 1)`` must be below 1; then the sampling
    period must satisfy ``h < h_max = (1 - gamma1) / gamma2``. When
    ``gamma1 >= 1`` no admissible ``h`` exists and ``h_max`` is 0.
    """
    if not (0 <= rho_P < 1 and 0 <= rho_C < 1):
        raise ValueError("contraction factors must lie in [0, 1)")
    kf, kA, m = bounds.kappa_f, cs.kappa_A, bounds.m
    rPP = rho_P ** P
    gamma1 = rho_C ** C * (2 * rPP + 1)
    gamma2 = (kf * kA ** 2 / m) * ((kf * kA ** 2 + 1) / m * bounds.C1 * bounds.C0 + bounds.C2) \
        * rho_C ** (C - 1) * (rPP + 1)
    if gamma1 >= 1:
        h_max = 0.0
    elif gamma2 == 0:
        h_max = math.inf
    else:
        h_max = (1 - gamma1) / gamma2
    return Conditions(gamma1, gamma2, h_max)


def tau(gamma1, gamma2, h) -> float:
    return gamma1 + gamma2 * h


def asymptotic_errors(mode, rho_P, rho_C, P, C, bounds: SmoothnessBounds,
                      cs: ConstraintSet, h) -> tuple[float, float]:
    """Asymptotic dual and primal tracking-error bounds of prediction-correction.

    Parameters
    ----------
    mode : {"exact_derivative", "backward_difference"}
        The backward-difference bound replaces ``D3`` by ``D3 + h C3/2`` and
        adds ``C3 h^2 / 2`` to the numerators.
    rho_P, rho_C : float
    P, C : int
    bounds, cs
    h : float

    Returns
    -------
    asym_dual, asym_primal : float

    Raises
    ------
    NotContractive
        If ``tau(h) >= 1``.
    """
    if mode not in (EXACT_DERIVATIVE, BACKWARD_DIFFERENCE):
        raise ValueError(f"unknown mode {mode!r}")
    cond = convergence_conditions(rho_P, rho_C, P, C, bounds, cs)
    t = tau(cond.gamma1, cond.gamma2, h)
    if t >= 1:
        raise NotContractive(f"tau(h) = {t:.6g} >= 1 (gamma1 = {cond.gamma1:.6g}, "
                             f"h_max = {cond.h_max:.6g})")
    _, d2, d3, _ = deltas(bounds, cs)
    extra = 0.0
    if mode == BACKWARD_DIFFERENCE:
        d3 = delta3_tilde(d3, bounds.C3, h)
        extra = bounds.C3 / 2 * h ** 2
    bracket = rho_P ** P * (d2 * d3 * h + d2 * bounds.C0) + d2 * d3 * h
    dual = (rho_C ** C * bracket * h + extra) / (1 - t)
    primal = (cs.sigma_max * rho_C ** (C - 1) * bracket * h + extra) / ((1 - t) * bounds.m)
    return dual, primal


def baseline_error_bounds(rho_C, C, C_extra, C_total, K, cs: ConstraintSet, m,
                          err_pc_reference: Optional[float] = None):
    """Asymptotic primal error bounds of the correction-only strategies.

    Returns
    -------
    err_cec : float
        Correction followed by ``C_extra`` extra corrections, measured at
        the delivered (post-``C``) variable.
    err_tc : float
        ``C_total`` corrections per sample.
    err_pc_reference : float or None
        Passed through; the prediction-correction primal bound from
        :func:`asymptotic_errors`, when the caller has it.
    """
    if not 0 <= rho_C < 1:
        raise ValueError("rho_C must lie in [0, 1)")
    if K < 0:
        raise ValueError("K must be nonnegative")
    scale = cs.sigma_max / m

    def err(c_first, c_pow):
        return scale * rho_C ** (c_first - 1) * (rho_C ** c_pow * K / (1 - rho_C ** c_first) + K)

    return err(C, C + C_extra), err(C_total, C_total), err_pc_reference


def qp_perturbation_bounds(m, L, cs: ConstraintSet, c_norm) -> tuple[float, float]:
    """Bounds on the solution of ``min 0.5 dx^T Q dx + c^T dx s.t. A dx = 0``.

    Valid for any ``Q`` with spectrum in ``[m, L]``; the multiplier bound
    refers to the representative in im(A).
    """
    if c_norm < 0:
        raise ValueError("c_norm must be nonnegative")
    smax, smin = cs.sigma_max, cs.sigma_min_pos
    x_bound = (1 + (L / m) * smax ** 2 / smin ** 2) * c_norm / m
    lam_bound = (L / m) * smax / smin ** 2 * c_norm
    return x_bound, lam_bound


@dataclass(frozen=True)
class BoundReport:
    delta1: float
    delta2: float
    delta3: float
    delta4: float
    delta3_tilde: float
    rho_P: float
    rho_C: float
    gamma1: float
    gamma2: float
    tau_h: float
    h_max: float
    K: float
    asym_dual: float
    asym_primal: float
    err_cec: float
    err_tc: float
    err_pc: float
    contractive: bool

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        width = max(len(k) for k in self.as_dict())
        return "\n".join(f"{k:<{width}}  {v}" for k, v in self.as_dict().items())


def bound_report(bounds: SmoothnessBounds, cs: ConstraintSet, h, rho_P, rho_C, P, C,
                 C_extra=0, C_total=None, mode=EXACT_DERIVATIVE) -> BoundReport:
    """Evaluate every bound for one configuration.

    Asymptotic bounds that do not exist (``tau(h) >= 1``) are reported as
    ``inf`` and ``contractive`` is false.
    """
    d1, d2, d3, d4 = deltas(bounds, cs)
    cond = convergence_conditions(rho_P, rho_C, P, C, bounds, cs)
    t = tau(cond.gamma1, cond.gamma2, h)
    K = drift_constant_K(bounds, cs, h)
    try:
        asym_dual, asym_primal = asymptotic_errors(mode, rho_P, rho_C, P, C, bounds, cs, h)
    except NotContractive:
        asym_dual = asym_primal = math.inf
    err_cec, err_tc, _ = baseline_error_bounds(
        rho_C, C, C_extra, C_total if C_total is not None else 2 * C, K, cs, bounds.m
    )
    return BoundReport(
        delta1=d1, delta2=d2, delta3=d3, delta4=d4,
        delta3_tilde=delta3_tilde(d3, bounds.C3, h),
        rho_P=rho_P, rho_C=rho_C, gamma1=cond.gamma1, gamma2=cond.gamma2,
        tau_h=t, h_max=cond.h_max, K=K,
        asym_dual=asym_dual, asym_primal=asym_primal,
        err_cec=err_cec, err_tc=err_tc, err_pc=asym_primal,
        contractive=bool(t < 1),
    )
