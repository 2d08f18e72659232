import warnings

import numpy as np
import pytest

from dupc.bench import (
    FAILED,
    FLAGGED,
    INFEASIBLE,
    OK,
    SUMMARY_COLUMNS,
    RunSpec,
    SweepSpec,
    compare_budgeted,
    fit_slope,
    run_single,
    run_sweep,
    slopes,
)
from dupc.errors import ConfigError, DegenerateFit
from dupc.scenarios import SYNTHETIC_QUADRATIC, Scenario
from dupc.tracker import RuntimeBudget


def test_fit_slope_examples():
    hs = np.array([0.05, 0.1, 0.2, 0.4])
    assert fit_slope(list(zip(hs, 3 * hs)))[0] == pytest.approx(1.0, abs=1e-9)
    assert fit_slope(list(zip(hs, 0.2 * hs ** 2)))[0] == pytest.approx(2.0, abs=1e-9)
    slope, intercept, r2 = fit_slope([(1, 1), (2, 4), (4, 16)])
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert intercept == pytest.approx(0.0, abs=1e-12) and r2 == pytest.approx(1.0)


def test_fit_slope_errors():
    with pytest.raises(DegenerateFit):
        fit_slope([(0.1, 1e-16), (0.2, 0.0), (0.4, 1e-15)])
    with pytest.raises(ValueError):
        fit_slope([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        fit_slope([(0.1, 1.0), (0.2, -2.0), (0.4, 1.0)])


SMALL = Scenario(N=6, seed=0, omega=0.5)


def test_sweep_rows_sorted_and_thread_independent():
    spec = SweepSpec(h_values=(0.1, 0.2, 0.4), k_max=60, P_values=(5, 2), seeds=(0, 1))
    one = run_sweep(SMALL, spec, threads=1)
    three = run_sweep(SMALL, spec, threads=3)
    assert one.to_csv() == three.to_csv()
    keys = [(r["h"], r["strategy"], r["P"], r["seed"]) for r in one.rows]
    assert keys == sorted(keys)
    assert len(one.rows) == 3 * 3 * 2
    assert one.to_csv().splitlines()[0] == ",".join(SUMMARY_COLUMNS)
    assert all(r["status"] == OK for r in one.rows)


def test_sweep_writes_files(tmp_path):
    spec = SweepSpec(h_values=(0.1, 0.2, 0.4), k_max=30)
    res = run_sweep(SMALL, spec, out_dir=tmp_path)
    assert (tmp_path / "summary.csv").read_text() == res.to_csv()
    assert len(list(tmp_path.glob("run_*.csv"))) == len(res.rows)


def test_diverging_cells_are_failed_rows():
    spec = SweepSpec(h_values=(0.1, 0.2, 0.4), k_max=40, alpha=50.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_sweep(SMALL, spec)
    assert res.failed
    assert all(r["status"] == FAILED and r["message"] for r in res.rows)
    assert slopes(res.rows) == {}


def test_zero_drift_is_flagged_below_oracle_resolution():
    res = run_sweep(Scenario(N=6, seed=0, amp=0.0), SweepSpec(h_values=(0.1, 0.2, 0.4), k_max=40))
    assert all(r["status"] == FLAGGED for r in res.rows)
    assert all(r["steady_state_err_primal"] < 1e-10 for r in res.rows)
    assert not res.failed


def test_slopes_of_quadratic_sweep():
    sc = Scenario(kind=SYNTHETIC_QUADRATIC, N=6, p=2, seed=1, omega=0.3, condition=2.0)
    spec = SweepSpec(h_values=(0.05, 0.1, 0.2, 0.4), k_max=400, P_values=(60,), C=1)
    fits = slopes(run_sweep(sc, spec).rows)
    assert fits[("correction_only", 0, 0)][0] == pytest.approx(1.0, abs=0.2)
    assert fits[("adupc", 60, 0)][0] == pytest.approx(2.0, abs=0.25)


def test_sweep_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec(h_values=(0.2, 0.1))
    with pytest.raises(ConfigError):
        SweepSpec(strategies=("newton",))
    with pytest.raises(ConfigError):
        SweepSpec.from_dict({"h": [0.1]})
    spec = SweepSpec(h_values=(0.1, 0.2))
    assert SweepSpec.from_dict(spec.to_dict()) == spec


def test_compare_budgeted_rows():
    budget = RuntimeBudget()
    rows = compare_budgeted(SMALL, budget, (0.02, 0.08, 0.16), k_max=80)
    assert rows[0]["status"] == INFEASIBLE and rows[0]["C"] == 0
    row = rows[1]
    assert (row["P"], row["C"], row["C_extra"], row["C_total"]) == (10, 1, 1, 3)
    for r in rows[1:]:
        assert r["status"] == OK
        assert r["bound_err_cec"] >= r["bound_err_tc"] >= 0
        assert r["err_adupc"] < r["err_total_correction"]


def test_compare_budgeted_zero_drift():
    rows = compare_budgeted(Scenario(N=6, seed=0, amp=0.0), RuntimeBudget(), (0.08, 0.16),
                            k_max=600)
    for r in rows:
        for key in ("err_adupc", "err_correction_plus_extra", "err_total_correction"):
            assert r[key] < 1e-10


def test_run_single_distributed_matches_centralized():
    spec = RunSpec(h=0.1, k_max=20, P=4, C=2)
    log, comm = run_single(SMALL, spec)
    assert comm is None
    dlog, comm = run_single(SMALL, RunSpec(h=0.1, k_max=20, P=4, C=2, distributed=True))
    np.testing.assert_allclose(dlog.xs, log.xs, atol=1e-9)
    assert len(comm.rows) == 20 * 6
    with pytest.raises(ConfigError):
        run_single(Scenario(kind=SYNTHETIC_QUADRATIC, N=4, p=2), RunSpec(distributed=True))
