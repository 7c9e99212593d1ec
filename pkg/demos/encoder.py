"""Arbitrary functionals: send the index of a covering cell, a few bits per reading."""
from noisyinfo import algorithms as alg, bounds, entropy, measurement as ms
from noisyinfo.spaces import INF, Identity

square = Identity(INF, INF, 2)
for delta in (0.4, 0.2, 0.1):
    print(f"delta={delta}: adversary limit k={ms.k_delta(delta)} bits, encoder sends k'={alg.k_prime_delta(delta)} bits")

cover = entropy.grid_cover_linf(2, 4)  # 16 squares of radius 1/4
pol = alg.build_encoder_policy(cover, 0.4)
res = ms.run_session(pol, [0.6, -0.2], square, ms.SeededRandom(0.4, 1))
print("readings", [round(s.y, 3) for s in res.transcript], "-> center", res.output)

cert = bounds.grid_adversary(pol, square, 0.4)
print(f"grid adversary forces error >= {cert.claimed_bound} (cover radius {cover.radius}); "
      f"verified={cert.verified}")
