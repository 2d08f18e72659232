"""Spend the same wall-clock budget per sample in three ways.

Within each sampling period, prediction-correction splits the time between
prediction rounds and correction rounds. The two baselines spend the time
on corrections only, either delivering early or after all rounds. The
number of rounds per strategy comes from the per-operation timings of a
``RuntimeBudget``. The script prints measured errors next to their
closed-form bounds.
"""

from dupc import RuntimeBudget, Scenario, compare_budgeted, compute_budget

budget = RuntimeBudget(r1=0.5, r2=0.5, t_C=0.021, t_P=0.003, t_bar=0.008)
for h in (0.08, 0.32, 5.12):
    C, P, C_extra, C_total = compute_budget(budget, h)
    print(f"h = {h}: adupc P={P} C={C} | extra C'={C_extra} | total C''={C_total}")

rows = compare_budgeted(Scenario(N=20, seed=1), budget, (0.08, 0.16, 0.32), k_max=600)
print()
print(f"{'h':>5} {'adupc':>10} {'c+extra':>10} {'total':>10} {'bound pc':>10}")
for r in rows:
    print(f"{r['h']:>5} {r['err_adupc']:>10.2e} {r['err_correction_plus_extra']:>10.2e} "
          f"{r['err_total_correction']:>10.2e} {r['bound_err_pc']:>10.2e}")
