"""
The law of eps * z and the bounds built from it.

For standard normal eps and z the product has density K0(|w|)/pi, and the
upper-tail moment E[W 1(W > q_{1-a})] is the constant behind the asymptotic
lower bound on Delta_k. We tabulate it, check a closed form, and evaluate the
finite-sample lower bound and the explicit Gaussian upper bound.
"""
import numpy as np
from scipy import special

from dropaudit import (
    BoundParams,
    asymptotic_lower_bound,
    finite_sample_lower_bound,
    gaussian_upper_bound,
    product_normal_quantile,
    truncated_product_moment,
)

print(" alpha   q_{1-a}   tail moment   |q|K1(|q|)/pi   a log(1/a)   LB(a)")
for a in (0.001, 0.01, 0.05, 0.1, 0.25):
    q = product_normal_quantile(1 - a)
    tm = truncated_product_moment(a)
    print(f" {a:5.3f}  {q:8.4f}  {tm:11.6f}  {q * special.k1(q) / np.pi:13.6f}"
          f"  {a * np.log(1 / a):10.6f}  {asymptotic_lower_bound(a).value:.4f}")

lb = finite_sample_lower_bound(BoundParams(n=2000, p=2, k=500, t=0.02, delta=0.02))
print(f"\nfinite-sample LB at n=2000, k=500: {lb.value:.4f}")
print(f"  probability guarantee {lb.probability_guarantee} (raw {lb.extras['probability_raw']:.2f},"
      f" constants {lb.constants_assumed}) -> vacuous={lb.vacuous}")

ub = gaussian_upper_bound(BoundParams(n=10_000, k=10, p=5, t=1.0, delta=0.1))
print(f"Gaussian UB at n=1e4, k=10, p=5: {ub.value:.4f} with probability >= {ub.probability_guarantee:.4f}")
