"""Diagonal operators: truncation under noise, and a per-coordinate measurement plan."""
from noisyinfo import algorithms as alg, harness, spaces
from noisyinfo.spaces import INF, Diagonal

sigma = (1.0, 0.5, 0.25)
for p in (1.0, 2.0, INF):
    errs = [alg.diag_truncation_error(sigma, n, 0.2, p) for n in range(3)]
    print(f"p={p}: truncation error for n=0,1,2 ->", [round(e, 4) for e in errs])

s, tail = spaces.power_sigma(1, 8)
plan = alg.diag_allocate(s, 0.25, 0.5, tail)
print(plan.to_csv(), end="")
prob = Diagonal(s, tail, INF)
rep = harness.estimate_worst_error(alg.build_allocation_policy(plan, prob), prob, 0.5, budget=16, level=1)
print(f"{plan.total} readings, searched worst error {rep.estimated:.4f} (target 0.25)")
