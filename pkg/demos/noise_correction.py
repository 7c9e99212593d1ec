"""Shrink the uncertainty about a coordinate by a factor delta per noisy reading."""
from noisyinfo import algorithms as alg, harness, measurement as ms
from noisyinfo.spaces import INF, Identity

delta = 0.5
line = Identity(INF, INF, 1)
for r in range(1, 6):
    pol = alg.build_coord_refine_policy(1, r, delta)
    worst = harness.estimate_worst_error(pol, line, delta, budget=4).estimated
    print(f"r={r}: worst error {worst:.5f} (delta**r = {delta ** r:.5f})")

# a single session, step by step
pol = alg.build_coord_refine_policy(1, 3, delta)
res = ms.run_session(pol, [0.3], line, ms.SeededRandom(delta, 7))
for k, step in enumerate(res.transcript, 1):
    lo, hi = pol.intervals(res.transcript.prefix(k))[0]
    print(f"step {k}: y={step.y:+.4f}  interval [{lo:+.4f}, {hi:+.4f}]")
print("output", res.output, "error", res.error)
