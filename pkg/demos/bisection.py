"""Continuous functionals: halve a ball cover with distance readings."""
import itertools

from noisyinfo import algorithms as alg, entropy, measurement as ms, spaces
from noisyinfo.spaces import INF, Identity

square = Identity(INF, INF, 2)
pol = alg.build_bisection_policy(entropy.grid_cover_linf(2, 2), 0.3)
print(f"delta+={pol.delta_plus}, eta={pol.eta:.5f}, guaranteed error <= {pol.error_bound:.4f}")

worst = 0.0
for f in spaces.dyadic_grid(2, 4):
    for signs in itertools.product((-1.0, 1.0), repeat=pol.budget):
        worst = max(worst, ms.run_session(pol, f, square, ms.SignPattern(0.3, signs)).error)
print("worst error over a 17x17 grid and all sign patterns:", worst)
