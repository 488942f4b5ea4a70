"""
How far can k deletions move a coefficient?

Three searches for the worst removal set: exhaustive enumeration (exact, tiny
problems only), 1-Greedy (exact single deletions, chained), and AMIP (rank
once by first-order influence, then refit). Every path entry is an exact
refit value, so both heuristics are certified lower bounds on the true
maximum.
"""
import numpy as np

from dropaudit import AuditQuery, ModelSpec, amip_audit, brute_force_delta, gen_model2, one_greedy

spec = ModelSpec(np.array([[1.0, 0.4], [0.4, 1.0]]), np.array([0.5, 0.2]))
data, _ = gen_model2(spec, 12, seed=3)
v = np.array([1.0, 0.0])

print(" k   exact    greedy   amip")
for k in (1, 2, 3):
    q = AuditQuery(v, k)
    bf = brute_force_delta(data, q)
    og = one_greedy(data, q)
    am = amip_audit(data, q)
    print(f" {k}  {bf.achieved_delta:7.4f}  {og.achieved_delta:7.4f}  {am.achieved_delta:7.4f}"
          f"   exact set {sorted(bf.removed)}")

# sign flip on a larger sample with a weak effect
big, _ = gen_model2(ModelSpec(np.eye(2), np.array([0.15, 1.0])), 300, seed=11)
tr = one_greedy(big, AuditQuery(v, 100, target="flip"))
print(f"\nbeta_1 = {tr.baseline:.4f}; 1-Greedy flips its sign after {tr.flip_at} removals")
print("first rows removed:", tr.removed[:10])
