"""Entropy numbers: closed forms, constructive covers, and packing/volume lower bounds.

Covers built from samples are certified against a deterministic dyadic grid
of the domain only; ``CoverSpec.resolution`` bounds how far any image point
can be from the sample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import spaces
from .errors import (
    BudgetExceeded,
    InconsistencyReport,
    InvalidInput,
    OutOfRegimeWarning,
    UnsupportedInstance,
)
from .spaces import INF, Diagonal, Identity, Problem

KAPPA_BAND = (1.0, 6.0)
MAX_BITS = 20


@dataclass
class CoverSpec:
    """2**bits (or fewer) balls of a common radius in the target space."""

    centers: np.ndarray
    radius: float
    bits: int
    target: Optional[Problem] = None
    certification: str = "exact"
    resolution: float = 0.0

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if len(self.centers) > 2 ** self.bits:
            raise InvalidInput(f"{len(self.centers)} centers exceed the budget 2**{self.bits}")
        if self.radius < 0:
            raise InvalidInput("radius must be nonnegative")

    @property
    def q(self) -> float:
        return INF if self.target is None else self.target.q

    def __len__(self):
        return len(self.centers)

    def covers(self, points, tol: float = 1e-12) -> bool:
        """True iff every row of ``points`` lies within radius (+tol) of a center."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d, _ = cKDTree(self.centers).query(pts, p=self.q)
        return bool(np.all(d <= self.radius + tol))


@dataclass(frozen=True)
class EntropyEstimate:
    n: int
    lower: float
    upper: float
    formula_value: float
    formula_band: Optional[tuple]
    resolution: float

    @property
    def band(self):
        if self.formula_band is None:
            return None
        lo, hi = self.formula_band
        return lo * self.formula_value, hi * self.formula_value


def formula_diagonal(sigma: Sequence[float], n: int, tail: float = 0.0) -> float:
    """sup_k 2**(-n/k) (sigma_1 ... sigma_k)**(1/k), the kappa-free entropy expression.

    Entries past the truncation are taken equal to ``tail``; for k beyond the
    truncation the log of the term is ``log(tail) + C/k``, so the supremum
    there is the first such term or the limit ``tail``.
    """
    s = np.asarray(sigma, dtype=float)
    if s.size == 0:
        raise InvalidInput("sigma must be nonempty")
    if n < 0:
        raise InvalidInput("n must be nonnegative")
    if np.any(s < 0) or tail < 0:
        raise InvalidInput("sigma must be nonnegative")
    # the power of two is kept separate so flat sequences give exact dyadic values
    best = 0.0
    log_prod = 0.0
    for k, v in enumerate(s, start=1):
        if v <= 0:
            break
        log_prod += math.log(v)
        best = max(best, 2.0 ** (-n / k) * math.exp(log_prod / k))
    else:
        if tail > 0:
            M = s.size
            nxt = 2.0 ** (-n / (M + 1)) * math.exp((log_prod + math.log(tail)) / (M + 1))
            best = max(best, nxt, tail)
    return best


def formula_identity(p: float, q: float, m: int, n: int) -> float:
    """Constant-free asymptotic shape of the entropy numbers of I: l_p^m -> l_q^m.

    (log(m/n + 1) / n)**(1/p - 1/q) for p < q, valid for log2(m) <= n <= m;
    2**(-n/m) for p == q. Hidden constants are unknown, so the value is only
    meaningful up to a factor.
    """
    p, q = spaces.check_exponent(p), spaces.check_exponent(q)
    if p > q:
        raise InvalidInput("asymptotic formula needs p <= q")
    if m < 1 or n < 0:
        raise InvalidInput("need m >= 1 and n >= 0")
    if p == q:
        return 2.0 ** (-n / m)
    if not (math.log2(m) <= n <= m):
        warnings.warn(f"n={n} outside [log2(m), m] for m={m}", OutOfRegimeWarning, stacklevel=2)
    if n == 0:
        return INF
    expo = (0.0 if p == INF else 1.0 / p) - (0.0 if q == INF else 1.0 / q)
    return (math.log(m / n + 1.0) / n) ** expo


def grid_cover_linf(m: int, n: int) -> CoverSpec:
    """The uniform grid of 2**n cubes covering B_inf^m, each axis cut into 2**(n/m) pieces."""
    if m < 1 or n < 0 or n % m:
        raise InvalidInput(f"need m >= 1 dividing n, got m={m}, n={n}")
    per_axis = 2 ** (n // m)
    axis = -1.0 + (2.0 * np.arange(per_axis) + 1.0) / per_axis
    centers = np.array(list(product(axis, repeat=m)))
    return CoverSpec(centers, 1.0 / per_axis, n, Identity(INF, INF, m), "exact", 0.0)


def default_level(dim: int) -> int:
    if dim <= 2:
        return 7
    if dim == 3:
        return 5
    if dim <= 6:
        return 3
    return 2


def _check_budget(n: int):
    if n < 0:
        raise InvalidInput("n must be nonnegative")
    if n > MAX_BITS:
        raise BudgetExceeded(f"2**{n} centers exceed the limit 2**{MAX_BITS}")


def _check_geometry(prob):
    if not isinstance(prob, (Identity, Diagonal)):
        raise UnsupportedInstance(f"no sampler for {type(prob).__name__}")


def _farthest_points(pts: np.ndarray, k: int, q: float, start: int):
    """Gonzalez traversal; returns chosen indices and the selection distances."""
    idx = [start]
    sel = [INF]
    d = spaces.pairwise_norm(pts - pts[start], q)
    for _ in range(1, k):
        i = int(np.argmax(d))
        idx.append(i)
        sel.append(float(d[i]))
        d = np.minimum(d, spaces.pairwise_norm(pts - pts[i], q))
    return np.array(idx), np.array(sel), d


def _one_center(cluster: np.ndarray, q: float) -> np.ndarray:
    if q == INF:
        return 0.5 * (cluster.min(axis=0) + cluster.max(axis=0))
    if q == 1.0:
        return np.median(cluster, axis=0)
    return cluster.mean(axis=0)


def greedy_cover(prob: Problem, n: int, level: Optional[int] = None, seed: int = 0,
                 iters: int = 50) -> CoverSpec:
    """Farthest-point cover of the sampled image with Lloyd-style refinement.

    The returned radius covers every sample point; the true image is covered
    with radius ``radius + resolution``.
    """
    _check_budget(n)
    _check_geometry(prob)
    level = default_level(prob.dim) if level is None else level
    pts = np.unique(spaces.image_samples(prob, level), axis=0)
    res = spaces.sample_resolution(prob, level)
    q = prob.q
    N = 2 ** n
    if N >= len(pts):
        return CoverSpec(pts, 0.0, n, prob, "sample-certified", res)
    start = int(np.random.default_rng(seed).integers(len(pts)))
    idx, _, d = _farthest_points(pts, N, q, start)
    best_c, best_r = pts[idx].copy(), float(d.max())
    centers = best_c.copy()
    for _ in range(iters):
        dist, assign = cKDTree(centers).query(pts, p=q)
        new = centers.copy()
        for j in np.unique(assign):
            new[j] = _one_center(pts[assign == j], q)
        dist, _ = cKDTree(new).query(pts, p=q)
        r = float(dist.max())
        if r < best_r:
            best_c, best_r = new.copy(), r
        if np.allclose(new, centers, rtol=0, atol=1e-15):
            break
        centers = new
    return CoverSpec(best_c, best_r, n, prob, "sample-certified", res)


def separated_bound(prob: Problem, n: int, level: Optional[int] = None, seed: int = 0) -> float:
    """Half the minimum separation of 2**n + 1 image points found greedily.

    Balls of radius below that separation hold at most one of the points, so
    2**n of them cannot cover the image.
    """
    _check_budget(n)
    _check_geometry(prob)
    level = default_level(prob.dim) if level is None else level
    pts = np.unique(spaces.image_samples(prob, level), axis=0)
    k = 2 ** n + 1
    if k > len(pts):
        return 0.0
    start = int(np.random.default_rng(seed).integers(len(pts)))
    _, sel, _ = _farthest_points(pts, k, prob.q, start)
    return 0.5 * float(sel[1:].min())


def volume_bound(prob: Problem, n: int) -> float:
    """Volume comparison on the coordinates with positive weight."""
    _check_geometry(prob)
    w = prob.weights
    w = w[w > 0]
    m = w.size
    if m == 0:
        return 0.0
    log_vol_image = float(np.sum(np.log(w))) + m * math.log(prob.domain_radius) \
        + math.log(spaces.ball_volume(prob.p, m))
    log_vol_ball = math.log(spaces.ball_volume(prob.q, m))
    return math.exp((log_vol_image - n * math.log(2.0) - log_vol_ball) / m)


def packing_lower(prob: Problem, n: int, level: Optional[int] = None, seed: int = 0) -> float:
    """Rigorous lower bound on the n-th entropy number of the image."""
    return max(separated_bound(prob, n, level, seed), volume_bound(prob, n))


def reference_formula(prob: Problem, n: int):
    """(formula value, band multipliers or None) for a problem instance."""
    if isinstance(prob, Diagonal):
        return formula_diagonal(prob.sigma, n, prob.tail) * prob.domain_radius, KAPPA_BAND
    if prob.p == prob.q:
        return formula_diagonal(np.ones(prob.m), n) * prob.domain_radius, KAPPA_BAND
    if prob.p < prob.q:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutOfRegimeWarning)
            return formula_identity(prob.p, prob.q, prob.m, n), None
    return math.nan, None


def sandwich(prob: Problem, n: int, level: Optional[int] = None, seed: int = 0) -> EntropyEstimate:
    """Bracket the n-th entropy number and check it against the closed form.

    Raises InconsistencyReport if the bracket is inverted beyond the sample
    resolution, or if for a diagonal-type instance it misses the band
    [formula, 6 * formula].
    """
    cover = greedy_cover(prob, n, level, seed)
    lower = packing_lower(prob, n, level, seed)
    upper = cover.radius
    res = cover.resolution
    value, band = reference_formula(prob, n)
    est = EntropyEstimate(n, lower, upper, value, band, res)
    slack = res + 1e-12
    if lower > upper + slack:
        raise InconsistencyReport(f"n={n}: lower {lower} exceeds upper {upper} + resolution {res}")
    if band is not None:
        lo, hi = est.band
        if not (lower <= hi + 1e-12 and upper + slack >= lo):
            raise InconsistencyReport(
                f"n={n}: bracket [{lower}, {upper}] misses band [{lo}, {hi}]")
    return est
