"""
Robustness and consistency as n grows.

Region I keeps k and p near sqrt(n); regions II-IV let k, p or both grow like
n/4. A small grid (fewer seeds than the full acceptance run) already shows
Delta vanishing only when k/n -> 0, and the estimation error on the
adversarial subset vanishing only when p/n -> 0.
"""
from dropaudit.simulate import regime_trends, run_regime_grid

rows = run_regime_grid(n_list=(200, 800), seeds=8, master_seed=1)
print(" region    n    k    p   mean delta   err subset   theory LB")
for r in rows:
    lb = "-" if r["theory_lb"] is None else f"{r['theory_lb']:.3f}"
    print(f"  {r['region']:>4s} {r['n']:5d} {r['k']:4d} {r['p']:4d}   {r['mean_delta']:.4f}"
          f"       {r['mean_err_subset']:.4f}      {lb}")
print()
for region, t in regime_trends(rows).items():
    print(f"  {region:>3s}: delta {t['delta_change']:+.0%}, error {t['err_change']:+.0%}")
