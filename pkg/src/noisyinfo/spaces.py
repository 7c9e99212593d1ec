"""Finite-dimensional l_p geometry and the two model problems.

Points are plain 1-d float arrays. The exponent ``p = INF`` is ``math.inf``,
compared by identity of value, never approximated by a large float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainViolation, InvalidInput, UnsupportedInstance

INF = math.inf

DOMAIN_RTOL = 1e-9


def as_point(x) -> np.ndarray:
    """Convert to a finite, nonempty 1-d float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInput(f"expected a nonempty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("point has non-finite entries")
    return arr


def check_exponent(p: float) -> float:
    p = float(p)
    if not (p >= 1.0):
        raise InvalidInput(f"norm exponent must be >= 1 or inf, got {p}")
    return p


def parse_exponent(text: Union[str, float]) -> float:
    """Parse ``'inf'``, ``'infinity'`` or a number >= 1."""
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinity", "oo"):
        return INF
    return check_exponent(float(text))


def dual_exponent(p: float) -> float:
    p = check_exponent(p)
    if p == 1.0:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1.0)


def _inv(p: float) -> float:
    return 0.0 if p == INF else 1.0 / p


def norm(x, p: float) -> float:
    x = as_point(x)
    p = check_exponent(p)
    if p == INF:
        return float(np.max(np.abs(x)))
    if p == 1.0:
        return float(np.sum(np.abs(x)))
    return float(np.linalg.norm(x, ord=p))


def embedding_norm(p: float, q: float, m: int) -> float:
    """Operator norm of the identity from l_p^m to l_q^m."""
    p, q = check_exponent(p), check_exponent(q)
    if m < 1:
        raise InvalidInput("dimension must be positive")
    if p <= q:
        return 1.0
    return float(m) ** (_inv(q) - _inv(p))


def extremal_vector(p: float, q: float, m: int) -> np.ndarray:
    """A unit vector of l_p^m attaining the norm of the embedding into l_q^m."""
    if p <= q:
        x = np.zeros(m)
        x[0] = 1.0
        return x
    return np.full(m, float(m) ** -_inv(p))


def dist_to_union(y, centers, radius: float, q: float) -> float:
    """Distance in l_q from ``y`` to a union of closed balls of equal radius."""
    y = as_point(y)
    c = np.asarray(centers, dtype=float)
    if c.size == 0:
        raise InvalidInput("empty center list")
    if c.ndim == 1:
        c = c.reshape(1, -1)
    if c.shape[1] != y.size:
        raise InvalidInput("center dimension does not match point")
    if radius < 0:
        raise InvalidInput("radius must be nonnegative")
    d = pairwise_norm(c - y, q)
    return float(max(np.min(d) - radius, 0.0))


def pairwise_norm(diffs: np.ndarray, q: float) -> np.ndarray:
    """Row-wise l_q norms of a 2-d array (last axis)."""
    a = np.abs(diffs)
    if q == INF:
        return a.max(axis=-1)
    if q == 1.0:
        return a.sum(axis=-1)
    if q == 2.0:
        return np.sqrt((a * a).sum(axis=-1))
    return (a ** q).sum(axis=-1) ** (1.0 / q)


@dataclass(frozen=True)
class Identity:
    """The embedding of the unit ball of l_p^m into l_q^m."""

    p: float
    q: float
    m: int
    domain_radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", check_exponent(self.p))
        object.__setattr__(self, "q", check_exponent(self.q))
        if int(self.m) != self.m or self.m < 1:
            raise InvalidInput("dimension must be a positive integer")
        object.__setattr__(self, "m", int(self.m))
        if not self.domain_radius > 0:
            raise InvalidInput("domain radius must be positive")

    @property
    def dim(self) -> int:
        return self.m

    @property
    def weights(self) -> np.ndarray:
        return np.ones(self.m)

    @property
    def op_norm(self) -> float:
        return embedding_norm(self.p, self.q, self.m)

    def to_dict(self) -> dict:
        return {"kind": "identity", "p": _fmt_exp(self.p), "q": _fmt_exp(self.q),
                "m": self.m, "domain_radius": self.domain_radius}


@dataclass(frozen=True)
class Diagonal:
    """Coordinatewise scaling by a nonincreasing sequence, l_p to l_p.

    ``sigma`` is a finite truncation; ``tail`` bounds every later entry and is
    itself the next entry. A positive tail is carried as one extra coordinate,
    so ``dim == len(sigma) + 1`` in that case.
    """

    sigma: tuple
    tail: float = 0.0
    p: float = INF
    domain_radius: float = 1.0

    def __post_init__(self):
        s = tuple(float(v) for v in self.sigma)
        if not s:
            raise InvalidInput("sigma must be nonempty")
        if any(not math.isfinite(v) or v < 0 for v in s):
            raise InvalidInput("sigma entries must be finite and nonnegative")
        if any(a < b for a, b in zip(s, s[1:])):
            raise InvalidInput("sigma must be nonincreasing")
        tail = float(self.tail)
        if tail < 0 or tail > s[-1]:
            raise InvalidInput("tail must satisfy 0 <= tail <= sigma[-1]")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "p", check_exponent(self.p))
        if not self.domain_radius > 0:
            raise InvalidInput("domain radius must be positive")

    @property
    def q(self) -> float:
        return self.p

    @property
    def dim(self) -> int:
        return len(self.sigma) + (1 if self.tail > 0 else 0)

    @property
    def weights(self) -> np.ndarray:
        w = list(self.sigma)
        if self.tail > 0:
            w.append(self.tail)
        return np.asarray(w, dtype=float)

    @property
    def op_norm(self) -> float:
        return self.sigma[0]

    def sigma_at(self, k: int) -> float:
        """The k-th entry (1-based), falling back to the tail bound."""
        if k < 1:
            raise InvalidInput("index is 1-based")
        return self.sigma[k - 1] if k <= len(self.sigma) else self.tail

    def to_dict(self) -> dict:
        return {"kind": "diagonal", "sigma": list(self.sigma), "tail": self.tail,
                "p": _fmt_exp(self.p), "domain_radius": self.domain_radius}


Problem = Union[Identity, Diagonal]


def _fmt_exp(p: float):
    return "inf" if p == INF else p


def problem_from_dict(d: dict) -> Problem:
    kind = d.get("kind")
    if kind == "identity":
        return Identity(parse_exponent(d["p"]), parse_exponent(d["q"]), int(d["m"]),
                        float(d.get("domain_radius", 1.0)))
    if kind == "diagonal":
        return Diagonal(tuple(d["sigma"]), float(d.get("tail", 0.0)),
                        parse_exponent(d["p"]), float(d.get("domain_radius", 1.0)))
    raise UnsupportedInstance(f"unknown problem kind {kind!r}")


def in_domain(prob: Problem, x) -> bool:
    x = as_point(x)
    if x.size != prob.dim:
        return False
    r = prob.domain_radius
    return norm(x, prob.p) <= r * (1.0 + DOMAIN_RTOL)


def apply_operator(prob: Problem, x) -> np.ndarray:
    x = as_point(x)
    if x.size != prob.dim:
        raise InvalidInput(f"point has dimension {x.size}, problem has {prob.dim}")
    if not in_domain(prob, x):
        raise DomainViolation(f"||x||_{prob.p} = {norm(x, prob.p)} exceeds {prob.domain_radius}")
    if isinstance(prob, Identity):
        return x.copy()
    return prob.weights * x


def _check_supported(prob):
    if not isinstance(prob, (Identity, Diagonal)):
        raise UnsupportedInstance(f"no modulus for {type(prob).__name__}")


def modulus(prob: Problem, gamma: float) -> float:
    """Modulus of continuity of the solution operator at scale ``gamma``.

    Both instances are linear and the difference set of a centered ball of
    radius R is the ball of radius 2R, so the supremum is the operator norm
    times ``min(gamma, 2R)``.
    """
    _check_supported(prob)
    if gamma < 0:
        raise InvalidInput("gamma must be nonnegative")
    return prob.op_norm * min(float(gamma), 2.0 * prob.domain_radius)


def modified_modulus(prob: Problem, gamma: float) -> float:
    """``gamma`` times the largest difference quotient at scales up to ``gamma``.

    For linear operators every scale sees the operator norm, so this is
    ``gamma * ||S||`` with no diameter cap.
    """
    _check_supported(prob)
    if gamma < 0:
        raise InvalidInput("gamma must be nonnegative")
    return float(gamma) * prob.op_norm


def power_sigma(s: float, length: int) -> tuple[tuple, float]:
    """sigma_j = j**(-s) for j <= length, with tail (length+1)**(-s)."""
    if length < 1:
        raise InvalidInput("length must be positive")
    if s < 0:
        raise InvalidInput("decay exponent must be nonnegative")
    sigma = tuple(float(j) ** (-s) for j in range(1, length + 1))
    return sigma, float(length + 1) ** (-s)


def load_sigma(source: str, length: int = 64) -> tuple[tuple, float]:
    """Load a sigma sequence from ``power:s`` or a file with one value per line.

    Returns ``(sigma, tail)``. A file-backed sequence is treated as finite
    (tail 0).
    """
    if source.startswith("power:"):
        return power_sigma(float(source.split(":", 1)[1]), length)
    values = []
    for lineno, line in enumerate(Path(source).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise InvalidInput(f"{source}:{lineno}: not a number: {line!r}") from exc
    if not values:
        raise InvalidInput(f"{source}: no values")
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise InvalidInput(f"{source}: values must be finite and nonnegative")
    if any(a < b for a, b in zip(values, values[1:])):
        raise InvalidInput(f"{source}: values must be nonincreasing")
    return tuple(values), 0.0


def unit_vector(m: int, i: int) -> np.ndarray:
    e = np.zeros(m)
    e[i] = 1.0
    return e


def ball_volume(p: float, m: int) -> float:
    """Lebesgue volume of the unit ball of l_p^m."""
    if p == INF:
        return 2.0 ** m
    return math.exp(m * math.log(2.0 * math.gamma(1.0 + 1.0 / p)) - math.lgamma(1.0 + m / p))


def sphere_points(m: int, p: float, count: int, seed: int = 0) -> np.ndarray:
    """Random points on the unit sphere of l_p^m (radial projection)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, m))
    return x / pairwise_norm(x, p)[:, None]


def dyadic_grid(m: int, level: int, radius: float = 1.0) -> np.ndarray:
    """All points of the cube [-radius, radius]^m with spacing 2*radius/2**level."""
    axis = np.linspace(-radius, radius, 2 ** level + 1)
    mesh = np.meshgrid(*([axis] * m), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def ball_samples(prob: Problem, level: int) -> np.ndarray:
    """Deterministic dense sample of the domain ball.

    Grid points inside the ball, plus outside grid points pulled radially onto
    the sphere so the boundary is represented.
    """
    pts = dyadic_grid(prob.dim, level, prob.domain_radius)
    if prob.p == INF:
        return pts
    n = pairwise_norm(pts, prob.p)
    out = n > prob.domain_radius
    pts[out] *= (prob.domain_radius / n[out])[:, None]
    return np.unique(pts, axis=0)


def image_samples(prob: Problem, level: int) -> np.ndarray:
    return ball_samples(prob, level) * prob.weights


def sample_resolution(prob: Problem, level: int) -> float:
    """Bound on the l_q distance from any image point to the nearest sample.

    For p = inf this is the half-spacing of the grid mapped through the
    operator. For finite p a grid point pulled onto the sphere moves by at
    most m**(1/p) half-spacings in the max norm.
    """
    h = prob.domain_radius / 2 ** level
    if prob.p != INF:
        h *= 1.0 + prob.dim ** (1.0 / prob.p)
    w = prob.weights
    if prob.q == INF:
        return float(h * w.max())
    return float(h * np.sum(w ** prob.q) ** (1.0 / prob.q))


def iter_sign_vectors(m: int) -> Iterable[np.ndarray]:
    for k in range(2 ** m):
        yield np.array([1.0 if (k >> i) & 1 else -1.0 for i in range(m)])


def dual_norm(w: Sequence[float], p: float) -> float:
    """Norm of the linear form <w, .> on l_p."""
    return norm(w, dual_exponent(p))


def domain_samples(prob: Problem, level: int) -> np.ndarray:
    """Dyadic grid of the domain ball together with the points +-R e_i."""
    pts = ball_samples(prob, level)
    r = prob.domain_radius
    eye = np.eye(prob.dim) * r
    return np.unique(np.vstack([pts, eye, -eye]), axis=0)


def search_level(dim: int) -> int:
    """Default grid level for worst-case searches, keeping the grid small."""
    return {1: 6, 2: 3, 3: 2}.get(dim, 1)
