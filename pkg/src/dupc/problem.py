"""
Time-varying equality-constrained problems.

A problem is a family of strongly convex programs

    min_x f(x; t)   subject to   A x = b,

described through oracles for the gradient, the Hessian and (optionally) the
mixed time/space derivative of the gradient, together with the constants
that the convergence analysis needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InfeasibleRHS, ZeroMatrix

RANK_TOL = 1e-10
FEASIBILITY_TOL = 1e-10

Oracle = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class SmoothnessBounds:
    """Strong convexity / smoothness constants and derivative bounds.

    ``C0`` bounds the mixed derivative of the gradient, ``C1``, ``C2`` and
    ``C3`` bound the third-order derivatives (space-space-space,
    space-time-space and time-time-space). The tensors themselves are never
    evaluated.
    """

    m: float
    L: float
    C0: float = 0.0
    C1: float = 0.0
    C2: float = 0.0
    C3: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.L < self.m:
            raise ValueError(f"L ({self.L}) must be >= m ({self.m})")
        for name in ("C0", "C1", "C2", "C3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def kappa_f(self) -> float:
        return self.L / self.m


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Constraint matrix, right-hand side and cached spectral data."""

    A: np.ndarray
    b: np.ndarray
    singular_values: np.ndarray
    rank: int
    # orthonormal basis of im(A), shape (p, rank)
    basis: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    @property
    def sigma_min_pos(self) -> float:
        return float(self.singular_values[self.rank - 1])

    @property
    def kappa_A(self) -> float:
        return self.sigma_max / self.sigma_min_pos


def analyze_constraints(A, b, tol=RANK_TOL) -> ConstraintSet:
    """Compute the spectral quantities of ``A`` and check that ``b`` is in im(A).

    Parameters
    ----------
    A : array_like, shape (p, n)
        Constraint matrix; may be rank deficient.
    b : array_like, shape (p,)
        Right-hand side.
    tol : float
        Relative rank tolerance: singular values below ``tol * sigma_max``
        count as zero.

    Returns
    -------
    ConstraintSet

    Raises
    ------
    ZeroMatrix
        If ``A`` is identically zero.
    InfeasibleRHS
        If the least-squares residual of ``b`` exceeds
        ``1e-10 * max(1, ||b||)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    A = np.atleast_2d(np.array(A, dtype=float))
    b = np.atleast_1d(np.array(b, dtype=float))
    if b.shape != (A.shape[0],):
        raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    if not np.any(A):
        raise ZeroMatrix("constraint matrix is identically zero")

    U, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s >= tol * s[0]))
    basis = U[:, :rank]

    residual = np.linalg.norm(basis @ (basis.T @ b) - b)
    if residual > FEASIBILITY_TOL * max(1.0, np.linalg.norm(b)):
        raise InfeasibleRHS(f"b is not in im(A): least-squares residual {residual:.3e}")

    A.setflags(write=False)
    b.setflags(write=False)
    return ConstraintSet(A=A, b=b, singular_values=s, rank=rank, basis=basis)


def project_onto_image(v, cs: ConstraintSet) -> np.ndarray:
    """Orthogonal projection of ``v`` onto im(A)."""
    v = np.asarray(v, dtype=float)
    return cs.basis @ (cs.basis.T @ v)


def image_deviation(v, cs: ConstraintSet) -> float:
    """Distance of ``v`` from im(A), relative to ``max(1, ||v||)``."""
    v = np.asarray(v, dtype=float)
    return float(np.linalg.norm(v - project_onto_image(v, cs)) / max(1.0, np.linalg.norm(v)))


@dataclass(frozen=True, eq=False)
class TimeVaryingProblem:
    """A sampled-in-time strongly convex program with linear equality constraints.

    The oracles must be pure functions of ``(x, t)``. ``value`` is optional
    and only used to drive the line search of the inner Newton solver.
    """

    grad: Oracle
    hessian: Oracle
    bounds: SmoothnessBounds
    constraints: ConstraintSet
    dimension: int
    mixed_grad: Optional[Oracle] = None
    value: Optional[Callable[[np.ndarray, float], float]] = None
    name: str = "problem"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.constraints.n != self.dimension:
            raise ValueError(
                f"constraint matrix has {self.constraints.n} columns, "
                f"problem dimension is {self.dimension}"
            )

    @property
    def has_mixed_grad(self) -> bool:
        return self.mixed_grad is not None


def hessian_eigen_range(problem: TimeVaryingProblem, points) -> tuple[float, float]:
    """Smallest and largest Hessian eigenvalue over sampled ``(x, t)`` pairs."""
    lo, hi = np.inf, -np.inf
    for x, t in points:
        w = np.linalg.eigvalsh(problem.hessian(np.asarray(x, dtype=float), t))
        lo, hi = min(lo, w[0]), max(hi, w[-1])
    return float(lo), float(hi)


@dataclass
class PrimalDualState:
    """Primal-dual pair at sample ``k`` (time ``t``)."""

    x: np.ndarray
    lam: np.ndarray
    k: int = 0
    t: float = 0.0

    def copy(self) -> "PrimalDualState":
        return PrimalDualState(self.x.copy(), self.lam.copy(), self.k, self.t)


def zero_state(problem: TimeVaryingProblem, t: float = 0.0) -> PrimalDualState:
    return PrimalDualState(
        np.zeros(problem.dimension), np.zeros(problem.constraints.p), 0, t
    )
