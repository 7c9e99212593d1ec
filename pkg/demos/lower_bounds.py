"""Certified lower bounds: every certificate carries witnesses that a checker replays."""
from noisyinfo import algorithms as alg, bounds, harness
from noisyinfo.spaces import INF, Diagonal, Identity

line = Identity(INF, INF, 1)
for r in (1, 2, 3):
    pol = alg.build_coord_refine_policy(1, r, 0.5)
    cert = bounds.lipschitz_floor(line, 0.5 ** (1 - r), 0.5, pol)
    est = harness.estimate_worst_error(pol, line, 0.5, budget=4).estimated
    print(f"r={r}: Lipschitz floor {cert.claimed_bound}, achieved {est}, verified={cert.verified}")

diag = Diagonal((0.8, 0.1))
cert = bounds.linear_floor(diag, 0.5)
print("linear floor", cert.claimed_bound, "witness rows:")
for row in cert.rows():
    print("  ", row)
