import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dupc.bounds import (
    BACKWARD_DIFFERENCE,
    EXACT_DERIVATIVE,
    asymptotic_errors,
    baseline_error_bounds,
    bound_report,
    convergence_conditions,
    delta3_tilde,
    deltas,
    drift_bounds,
    drift_constant_K,
    qp_perturbation_bounds,
    tau,
)
from dupc.dual import solve_oracle
from dupc.errors import NotContractive
from dupc.problem import SmoothnessBounds, analyze_constraints
from dupc.scenarios import (
    SYNTHETIC_QUADRATIC,
    Scenario,
    generate_scenario,
    quadratic_trajectory,
)

TOL = 1e-12


def cs_diag(*s):
    return analyze_constraints(np.diag(s), np.zeros(len(s)))


def test_drift_bounds_examples():
    b = SmoothnessBounds(1.0, 1.0, C0=1.0)
    primal, dual = drift_bounds(b, cs_diag(2.0, 2.0), 0.1)
    assert primal == pytest.approx(0.2, abs=TOL)
    assert dual == pytest.approx(0.05, abs=TOL)
    assert drift_bounds(SmoothnessBounds(1.0, 1.0), cs_diag(2.0), 0.1) == (0.0, 0.0)
    half = drift_bounds(b, cs_diag(2.0, 2.0), 0.05)
    assert half[0] == pytest.approx(primal / 2, abs=TOL) and half[1] == pytest.approx(dual / 2, abs=TOL)


def test_drift_constant_examples():
    b = SmoothnessBounds(1.0, 1.0, C0=1.0)
    assert drift_constant_K(b, cs_diag(1.0, 1.0), 0.1) == pytest.approx(0.2, abs=TOL)
    assert drift_constant_K(SmoothnessBounds(1.0, 1.0), cs_diag(1.0), 0.1) == 0.0
    b2, cs = SmoothnessBounds(1.0, 1.25, C0=0.7), cs_diag(2.0, 1.0)
    assert drift_constant_K(b2, cs, 0.3) == pytest.approx(max(drift_bounds(b2, cs, 0.3)), abs=TOL)


def test_deltas_examples():
    cs = cs_diag(2.0, 1.0)  # kappa_A = 2, sigma_min = 1
    d1, d2, d3, d4 = deltas(SmoothnessBounds(1.0, 1.25), cs)
    assert d1 == pytest.approx(6.0, abs=TOL) and d2 == pytest.approx(2.5, abs=TOL)
    assert d3 == 0.0 and d4 == 0.0
    assert delta3_tilde(d3, 0.0, 0.1) == 0.0
    _, _, d3, _ = deltas(SmoothnessBounds(1.0, 1.25, C3=0.4), cs)
    assert d3 == pytest.approx(0.2, abs=TOL)
    assert delta3_tilde(d3, 0.4, 0.1) == pytest.approx(0.2 * 1.1, abs=TOL)


def test_deltas_general_formula():
    # kappa_f = 2, kappa_A = 1, m = 1: D1 = 3; C0 = 2, C1 = 0.5, C2 = 0.25, C3 = 1
    _, _, d3, d4 = deltas(SmoothnessBounds(1.0, 2.0, 2.0, 0.5, 0.25, 1.0), cs_diag(1.0))
    assert d3 == pytest.approx(0.5 * 4 * 9 / 2 + 3 * 0.25 * 2 + 0.5, abs=TOL)
    assert d4 == pytest.approx(3 * 0.5 * 2 + 0.25, abs=TOL)


def test_gamma1_examples():
    b, cs = SmoothnessBounds(1.0, 1.0), cs_diag(1.0)
    # 0.8^5 * (2 * 0.8 + 1)
    assert convergence_conditions(0.8, 0.8, 1, 5, b, cs).gamma1 == pytest.approx(0.851968, abs=TOL)
    # P = 5, C = 2 is not contractive; C = 3 is
    c52 = convergence_conditions(0.8, 0.8, 5, 2, b, cs)
    assert c52.gamma1 == pytest.approx(0.64 * 1.65536, abs=TOL)
    assert not c52.contractive and c52.h_max == 0.0
    assert convergence_conditions(0.8, 0.8, 5, 3, b, cs).gamma1 == pytest.approx(0.512 * 1.65536, abs=TOL)
    # exact prediction limit
    assert convergence_conditions(0.8, 0.8, 10 ** 6, 1, b, cs).gamma1 == pytest.approx(0.8, abs=TOL)


def test_gamma2_and_h_max():
    cs = cs_diag(1.0)
    assert convergence_conditions(0.5, 0.5, 1, 2, SmoothnessBounds(1.0, 1.0, C3=3.0), cs).h_max == math.inf
    b = SmoothnessBounds(1.0, 2.0, C0=2.0, C1=0.5, C2=0.25)
    c = convergence_conditions(0.5, 0.5, 1, 2, b, cs)
    # (kf kA^2 / m) (D1 C1 C0 + C2) rho^(C-1) (rho^P + 1) with D1 = 3
    assert c.gamma2 == pytest.approx(2 * (3 * 0.5 * 2 + 0.25) * 0.5 * 1.5, abs=TOL)
    assert c.h_max == pytest.approx((1 - c.gamma1) / c.gamma2, abs=TOL)
    assert tau(c.gamma1, c.gamma2, c.h_max) == pytest.approx(1.0, abs=TOL)


def test_tau_examples():
    assert tau(0.85, 1.0, 0.05) == pytest.approx(0.90, abs=TOL)
    assert tau(0.3, 2.0, 0.0) == 0.3


def test_asymptotic_errors_hand_values():
    cs = cs_diag(1.0)
    b = SmoothnessBounds(1.0, 1.0, C0=1.0, C3=0.4)
    # gamma1 = 0.25 * 2 = 0.5, gamma2 = 0; D2 = 1, D3 = 0.2, D3~ = 0.22
    dual, primal = asymptotic_errors(EXACT_DERIVATIVE, 0.5, 0.5, 1, 2, b, cs, 0.1)
    assert dual == pytest.approx(0.0265, abs=TOL)
    assert primal == pytest.approx(0.053, abs=TOL)
    dual, primal = asymptotic_errors(BACKWARD_DIFFERENCE, 0.5, 0.5, 1, 2, b, cs, 0.1)
    assert dual == pytest.approx(0.03065, abs=TOL)
    assert primal == pytest.approx(0.0573, abs=TOL)


def test_asymptotic_errors_degenerate_and_failure():
    cs = cs_diag(1.0)
    assert asymptotic_errors(EXACT_DERIVATIVE, 0.5, 0.5, 1, 2, SmoothnessBounds(1.0, 1.0), cs, 0.1) == (0, 0)
    with pytest.raises(NotContractive):
        asymptotic_errors(EXACT_DERIVATIVE, 0.8, 0.8, 5, 2, SmoothnessBounds(1.0, 1.0), cs, 0.1)
    with pytest.raises(ValueError):
        asymptotic_errors("central", 0.5, 0.5, 1, 2, SmoothnessBounds(1.0, 1.0), cs, 0.1)


def test_second_order_in_exact_prediction_limit():
    cs = cs_diag(1.0)
    b = SmoothnessBounds(1.0, 1.0, C0=1.0, C3=0.4)
    e1 = asymptotic_errors(EXACT_DERIVATIVE, 0.5, 0.5, 10 ** 6, 2, b, cs, 0.01)[1]
    e2 = asymptotic_errors(EXACT_DERIVATIVE, 0.5, 0.5, 10 ** 6, 2, b, cs, 0.005)[1]
    assert e1 / e2 == pytest.approx(4.0, rel=1e-12)


def test_baseline_error_bounds():
    cs = cs_diag(1.0)
    assert baseline_error_bounds(0.8, 3, 1, 6, 0.0, cs, 1.0)[:2] == (0.0, 0.0)
    cec, tc, ref = baseline_error_bounds(0.8, 3, 0, 6, 1.0, cs, 1.0, err_pc_reference=0.1)
    assert cec == pytest.approx(80 / 61, abs=TOL)
    assert tc == pytest.approx(0.8 ** 5 / (1 - 0.8 ** 6), abs=TOL)
    assert tc < cec and ref == 0.1
    prev = cec
    for c_extra in range(1, 40):
        cur = baseline_error_bounds(0.8, 3, c_extra, 6, 1.0, cs, 1.0)[0]
        assert cur <= prev
        prev = cur
    assert prev == pytest.approx(0.64, abs=1e-3)


def test_qp_perturbation_examples():
    assert qp_perturbation_bounds(1.0, 1.0, cs_diag(1.0), 0.0) == (0.0, 0.0)
    assert qp_perturbation_bounds(1.0, 1.0, cs_diag(1.0), 1.0) == pytest.approx((2.0, 1.0), abs=TOL)


def test_report_consistency():
    b = SmoothnessBounds(1.0, 1.25, 0.5, 0.1, 0.0, 0.02)
    cs = cs_diag(2.0, 1.0)
    r = bound_report(b, cs, 0.1, 0.3, 0.3, 10, 3)
    assert r.contractive == (r.tau_h < 1) == (r.gamma1 < 1 and 0.1 < r.h_max)
    assert all(v >= 0 for v in r.as_dict().values() if isinstance(v, float))
    assert "gamma1" in r.to_text()
    bad = bound_report(b, cs, 0.1, 0.9, 0.9, 1, 1)
    assert not bad.contractive and bad.asym_primal == math.inf


@settings(max_examples=60, deadline=None)
@given(C=st.integers(1, 6), P=st.integers(0, 30), rho=st.floats(0.05, 0.95),
       which=st.sampled_from(["C0", "C1", "C2", "C3"]), h=st.floats(1e-4, 0.05))
def test_bounds_monotone(C, P, rho, which, h):
    cs = cs_diag(1.5, 1.0)
    base = dict(m=1.0, L=1.25, C0=0.3, C1=0.1, C2=0.05, C3=0.2)
    lo = SmoothnessBounds(**base)
    hi = SmoothnessBounds(**{**base, which: base[which] * 1.5})
    c1 = convergence_conditions(rho, rho, P, C, lo, cs)
    assert convergence_conditions(rho, rho, P, C + 1, lo, cs).gamma1 < c1.gamma1
    if 2 * rho ** P > 1e-12:
        assert convergence_conditions(rho, rho, P + 1, C, lo, cs).gamma1 < c1.gamma1
    c_hi = convergence_conditions(rho, rho, P, C, hi, cs)
    if tau(c_hi.gamma1, c_hi.gamma2, 2 * h) < 1:
        for mode in (EXACT_DERIVATIVE, BACKWARD_DIFFERENCE):
            a = asymptotic_errors(mode, rho, rho, P, C, lo, cs, h)
            b = asymptotic_errors(mode, rho, rho, P, C, hi, cs, h)
            c = asymptotic_errors(mode, rho, rho, P, C, lo, cs, 2 * h)
            assert b[0] >= a[0] and b[1] >= a[1]
            assert c[0] >= a[0] and c[1] >= a[1]
        bd = asymptotic_errors(BACKWARD_DIFFERENCE, rho, rho, P, C, lo, cs, h)
        ex = asymptotic_errors(EXACT_DERIVATIVE, rho, rho, P, C, lo, cs, h)
        assert bd[0] >= ex[0] and bd[1] >= ex[1]


def test_drift_bounds_dominate_quadratic_trajectory():
    # C1 = C2 = 0: the drift bound holds for every h
    sc = Scenario(kind=SYNTHETIC_QUADRATIC, N=6, p=3, seed=4, amp=2.0, omega=0.7)
    prob = generate_scenario(sc)
    traj = quadratic_trajectory(sc)
    for h in (1.0, 0.3, 0.05):
        primal, dual = drift_bounds(prob.bounds, prob.constraints, h)
        for t in np.linspace(0, 10, 21):
            (x0, l0), (x1, l1) = traj(t), traj(t + h)
            assert np.linalg.norm(x1 - x0) <= primal
            assert np.linalg.norm(l1 - l0) <= dual


def test_drift_bounds_dominate_consensus_small_h():
    lifted = generate_scenario(Scenario(N=6, seed=2, omega=0.5))
    prob = lifted.problem
    h = 1e-3
    primal, dual = drift_bounds(prob.bounds, prob.constraints, h)
    prev = solve_oracle(prob, 0.0, tol=1e-13)
    for t in np.arange(1, 40) * 0.3:
        a = solve_oracle(prob, t, tol=1e-13, warm_start=(prev.x_star, prev.lambda_star))
        b = solve_oracle(prob, t + h, tol=1e-13, warm_start=(a.x_star, a.lambda_star))
        assert np.linalg.norm(b.x_star - a.x_star) <= primal
        assert np.linalg.norm(b.lambda_star - a.lambda_star) <= dual
        prev = a
