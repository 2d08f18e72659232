import dataclasses

import numpy as np
import pytest

from dupc.dual import DualAscentConfig, balanced_stepsize, running_dual_ascent
from dupc.errors import NoConvergence
from dupc.problem import (
    SmoothnessBounds,
    TimeVaryingProblem,
    analyze_constraints,
    image_deviation,
    zero_state,
)
from dupc.scenarios import Scenario, generate_scenario
from dupc.tracker import (
    ADUPC,
    CORRECTION_ONLY,
    CORRECTION_PLUS_EXTRA,
    TOTAL_CORRECTION,
    RuntimeBudget,
    TrackerConfig,
    compute_budget,
    run_adupc,
    run_baseline,
    run_tracker,
)

from conftest import quadratic_problem, random_constraints, random_spd


def _drifting_problem(rng, n=4, p=2, rank=None):
    Q = random_spd(rng, n)
    A, b = random_constraints(rng, n, p, rank)
    w, phase = 0.3, rng.uniform(0, 2 * np.pi, n)
    return quadratic_problem(Q, A, b, r=lambda t: np.cos(w * t + phase),
                             dr=lambda t: -w * np.sin(w * t + phase))


def test_budget_examples():
    b = RuntimeBudget(r1=0.5, r2=0.5, t_C=0.021, t_P=0.003, t_bar=0.008)
    assert compute_budget(b, 0.08) == (1, 10, 1, 3)
    assert compute_budget(b, 5.12) == (121, 850, 121, 243)
    # r2 h below the fixed prediction cost
    assert compute_budget(b, 0.01)[1] == 0
    with pytest.raises(ValueError):
        compute_budget(b, 0.0)
    with pytest.raises(ValueError):
        RuntimeBudget(r1=0.7, r2=0.5)


def test_p0_reduces_to_running_dual_ascent(rng):
    prob = _drifting_problem(rng)
    a = balanced_stepsize(prob.bounds, prob.constraints)
    cfg = TrackerConfig(alpha=a, h=0.1, k_max=50, P=0, C=1)
    pc = run_adupc(prob, cfg)
    ref = running_dual_ascent(prob, cfg.times(), zero_state(prob), DualAscentConfig(alpha=a))
    assert np.array_equal(pc.xs, ref.xs) and np.array_equal(pc.lams, ref.lams)
    co = run_baseline(prob, dataclasses.replace(cfg, strategy=CORRECTION_ONLY))
    assert np.array_equal(pc.xs, co.xs) and np.array_equal(pc.lams, co.lams)


def test_zero_extra_reduces_to_correction_only(rng):
    prob = _drifting_problem(rng)
    a = balanced_stepsize(prob.bounds, prob.constraints)
    cfg = TrackerConfig(alpha=a, h=0.1, k_max=40, C=2, strategy=CORRECTION_ONLY)
    co = run_baseline(prob, cfg)
    cpe = run_baseline(prob, dataclasses.replace(cfg, strategy=CORRECTION_PLUS_EXTRA, C_extra=0))
    assert np.array_equal(co.xs, cpe.xs) and np.array_equal(co.lams, cpe.lams)
    tc = run_baseline(prob, dataclasses.replace(cfg, strategy=TOTAL_CORRECTION, C_total=2))
    assert np.array_equal(co.xs, tc.xs)


def test_extra_corrections_logged_before_extra_rounds(rng):
    prob = _drifting_problem(rng)
    a = balanced_stepsize(prob.bounds, prob.constraints)
    cfg = TrackerConfig(alpha=a, h=0.1, k_max=3, C=1, C_extra=2, strategy=CORRECTION_PLUS_EXTRA)
    log = run_baseline(prob, cfg)
    # first logged step equals one correction from the initial pair
    one = run_baseline(prob, dataclasses.replace(cfg, strategy=CORRECTION_ONLY, k_max=1))
    np.testing.assert_array_equal(log.xs[1], one.xs[1])
    assert log.meta == {"strategy": CORRECTION_PLUS_EXTRA, "P": 0, "C": 1, "C_extra": 2}


def test_time_invariant_all_strategies_converge(rng):
    Q = random_spd(rng, 4)
    A, b = random_constraints(rng, 4, 3, rank=2)
    prob = quadratic_problem(Q, A, b, r=lambda t: np.ones(4))
    a = balanced_stepsize(prob.bounds, prob.constraints)
    for strategy in (ADUPC, CORRECTION_ONLY, CORRECTION_PLUS_EXTRA, TOTAL_CORRECTION):
        cfg = TrackerConfig(alpha=a, beta=a, h=0.1, k_max=150, P=5, C=2, C_extra=1, C_total=3,
                            strategy=strategy)
        log = run_tracker(prob, cfg, oracle_tol=1e-12)
        ep, ed = log.errors()
        assert ep[-1] < 1e-9 and ed[-1] < 1e-9, strategy
        assert max(image_deviation(v, prob.constraints) for v in log.lam) <= 1e-8


def _two_node(h):
    a, w, phi = np.array([1.5, -0.5]), 0.4, np.array([0.2, 1.9])
    prob = quadratic_problem(np.eye(2), [[1.0, -1.0]], [0.0],
                             r=lambda t: a * np.cos(w * t + phi),
                             dr=lambda t: -a * w * np.sin(w * t + phi))

    def y_star(t):
        return np.full(2, np.mean(a * np.cos(w * t + phi)))

    return prob, y_star


def test_two_node_consensus_second_order():
    errs = []
    for h in (0.2, 0.1):
        prob, y_star = _two_node(h)
        # the balanced stepsize would solve each sample exactly (rho = 0)
        a = 0.25
        log = run_adupc(prob, TrackerConfig(alpha=a, beta=a, h=h, k_max=int(40 / h), P=20, C=3))
        tail = slice(len(log) // 2, None)
        errs.append(max(np.linalg.norm(x - y_star(t)) for x, t in zip(log.x[tail], log.t[tail])))
    assert errs[0] < 1e-2
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_error_ordering_under_runtime_budget():
    sc = Scenario(N=10, seed=1)
    prob = generate_scenario(sc).problem
    a = balanced_stepsize(prob.bounds, prob.constraints)
    C, P, C_extra, C_total = compute_budget(RuntimeBudget(), 0.08)
    base = TrackerConfig(alpha=a, beta=a, h=0.08, k_max=600, P=P, C=C, C_extra=C_extra,
                         C_total=C_total)
    err = {}
    for strategy in (ADUPC, CORRECTION_PLUS_EXTRA, TOTAL_CORRECTION):
        log = run_tracker(prob, dataclasses.replace(base, strategy=strategy), oracle_tol=1e-11)
        err[strategy] = log.steady_state_error()[0]
    assert err[ADUPC] <= err[TOTAL_CORRECTION] <= err[CORRECTION_PLUS_EXTRA]


def test_deterministic_logs(rng):
    prob = _drifting_problem(rng)
    a = balanced_stepsize(prob.bounds, prob.constraints)
    cfg = TrackerConfig(alpha=a, beta=a, h=0.1, k_max=30, P=4, C=2)
    assert run_adupc(prob, cfg, oracle_tol=1e-11).to_csv() == \
        run_adupc(prob, cfg, oracle_tol=1e-11).to_csv()


def test_backward_difference_needs_no_mixed_gradient(rng):
    prob = dataclasses.replace(_drifting_problem(rng), mixed_grad=None)
    a = balanced_stepsize(prob.bounds, prob.constraints)
    cfg = TrackerConfig(alpha=a, beta=a, h=0.1, k_max=10, P=4, C=2)
    with pytest.raises(ValueError, match="backward_difference"):
        run_adupc(prob, cfg)
    log = run_adupc(prob, dataclasses.replace(cfg, derivative_mode="backward_difference"))
    assert len(log) == 11


def test_inner_failure_reports_step():
    def grad(x, t):
        return np.sinh(x) - (t > 0.25) * 40.0

    prob = TimeVaryingProblem(grad, lambda x, t: np.diag(np.cosh(x)), SmoothnessBounds(1.0, 1.0),
                              analyze_constraints([[1.0, 0.0]], [0.0]), 2)
    cfg = TrackerConfig(alpha=0.5, h=0.1, k_max=5, C=1, strategy=CORRECTION_ONLY,
                        inner_max_iters=3)
    with pytest.raises(NoConvergence, match="step 2"):
        run_tracker(prob, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        TrackerConfig(alpha=0.1, h=0.0, k_max=1)
    with pytest.raises(ValueError):
        TrackerConfig(alpha=0.1, h=0.1, k_max=1, strategy="newton")
    with pytest.raises(ValueError):
        TrackerConfig(alpha=0.1, h=0.1, k_max=1, strategy=TOTAL_CORRECTION)
    with pytest.raises(ValueError):
        run_baseline(None, TrackerConfig(alpha=0.1, h=0.1, k_max=1))
