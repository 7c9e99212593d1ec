"""Entropy numbers: bracket the best n-bit covering radius and compare with the formula."""
from noisyinfo import entropy
from noisyinfo.spaces import INF, Diagonal, Identity

for prob in (Identity(INF, INF, 2), Diagonal((1.0, 0.5))):
    for n in range(1, 4):
        est = entropy.sandwich(prob, n)
        print(f"{prob!r} n={n}: [{est.lower:.4f}, {est.upper:.4f}] formula {est.formula_value:.4f}")

print("identity formula, l1 into l2, m=64:",
      [round(entropy.formula_identity(1, 2, 64, n), 4) for n in (8, 16, 32, 64)])
