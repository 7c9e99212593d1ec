"""Reproducible parameter sweeps: the same seed gives byte-identical CSV."""
from noisyinfo import harness
from noisyinfo.spaces import INF, Identity

cfg = harness.ExperimentConfig("refine", m=[1, 2], n="1:3", delta=[0.25, 0.5], budget=4, seed=1)
text = harness.sweep(cfg)
print(text, end="")
assert text == harness.sweep(cfg)

print(harness.compare_csv(harness.compare_settings(Identity(INF, INF, 4), 0.1, 0.05)), end="")
