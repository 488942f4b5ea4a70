"""
Empirical Delta_k against the asymptotic theory, p = 1.

Fifty datasets of size 1000 from the linear model with Gaussian noise. For
each alpha we remove k = round(alpha n) rows picked by AMIP and refit, and
compare the mean shift with the asymptotic lower bound. The noise-aware
adversarial subset (known only in simulation) is shown too.
"""
import numpy as np

from dropaudit import ModelSpec, SimulationConfig, run_figure1

cfg = SimulationConfig(
    ModelSpec(np.eye(1), np.ones(1)), n=1000, replicates=50,
    alphas=(0.01, 0.02, 0.03, 0.04, 0.05), master_seed=7,
    methods=("amip", "adversarial_oracle", "theory"),
)
res = run_figure1(cfg)

print(" alpha  method               mean     sd")
for alpha, method, mean, sd, n_ok in res.plot_table():
    print(f" {alpha:.2f}   {method:<18s} {mean:.4f}  {sd:.4f}")
print(f"\n{cfg.replicates} replicates in {res.wall_time:.1f} s; sd is across datasets")
