import numpy as np
import pytest
from scipy import linalg as sla

from dupc.problem import SmoothnessBounds, TimeVaryingProblem, analyze_constraints


def random_spd(rng, n, lo=1.0, hi=3.0):
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q = (U * rng.uniform(lo, hi, n)) @ U.T
    return 0.5 * (Q + Q.T)


def random_constraints(rng, n, p, rank=None, sv=(0.5, 2.0)):
    """p x n matrix of the given rank (full row rank when rank is None).

    The positive singular values are drawn uniformly from ``sv``.
    """
    rank = min(p, n) if rank is None else rank
    U = np.linalg.qr(rng.standard_normal((p, p)))[0][:, :rank]
    V = np.linalg.qr(rng.standard_normal((n, n)))[0][:, :rank]
    A = (U * rng.uniform(*sv, rank)) @ V.T
    b = A @ rng.standard_normal(n)
    return A, b


def quadratic_problem(Q, A, b, r=None, dr=None, C0=0.0, C3=0.0, name="quadratic"):
    """``f(x; t) = 0.5 x^T Q x - r(t)^T x`` subject to ``A x = b``.

    ``dr`` is the time derivative of ``r``; it defines the mixed gradient
    ``-dr(t)``.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    r = (lambda t: np.zeros(n)) if r is None else r
    dr = (lambda t: np.zeros(n)) if dr is None else dr
    eigs = np.linalg.eigvalsh(Q)
    return TimeVaryingProblem(
        grad=lambda x, t: Q @ x - r(t),
        hessian=lambda x, t: Q,
        bounds=SmoothnessBounds(m=float(eigs[0]), L=float(eigs[-1]), C0=C0, C3=C3),
        constraints=analyze_constraints(np.atleast_2d(A), np.atleast_1d(b)),
        dimension=n,
        mixed_grad=lambda x, t: -dr(t),
        value=lambda x, t: float(0.5 * x @ Q @ x - r(t) @ x),
        name=name,
    )


def nullspace_kkt(Q, A, q, b):
    """Brute-force solution of ``min 0.5 x^T Q x + q^T x  s.t.  A x = b``.

    Eliminates the constraint with an orthonormal null-space basis, then
    recovers the minimum-norm multiplier from stationarity. Independent of
    the package's range-space and bordered solvers.
    """
    A = np.atleast_2d(A)
    x_p = np.linalg.pinv(A) @ b
    Z = sla.null_space(A)
    if Z.shape[1]:
        y = np.linalg.solve(Z.T @ Q @ Z, -Z.T @ (Q @ x_p + q))
        x = x_p + Z @ y
    else:
        x = x_p
    lam = np.linalg.lstsq(A.T, -(Q @ x + q), rcond=None)[0]
    return x, lam


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE: dict = {}


def record_criterion(number, ok, detail):
    """Remember and print the outcome of one acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
