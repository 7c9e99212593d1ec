"""Constructive policies: quantized encoding, cover bisection, coordinate refinement,
noise correction, and the diagonal-operator routines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import spaces
from .entropy import CoverSpec
from .errors import (
    AdmissibilityViolation,
    InfeasibleTruncation,
    InvalidInput,
    InvalidParameters,
    ShapeMismatch,
)
from .measurement import (
    CONTINUOUS,
    CoordRefine,
    DistToUnion,
    Functional,
    NoiseAdversary,
    Policy,
    QuantizedCell,
    Transcript,
    coordinate,
    execute,
    k_delta,
    lipschitz,
    nudged_ceil,
    quantizer_levels,
    validate,
)
from .spaces import Diagonal, Problem


# -- quantized encoding -------------------------------------------------------

def k_prime_delta(delta: float) -> int:
    """Bits per measurement of the encoder: ceil(log2(1/delta + 1) - 1)."""
    if not 0 < delta < 1:
        raise InvalidParameters("delta must lie in (0, 1)")
    return max(nudged_ceil(math.log2(1.0 / delta + 1.0) - 1.0), 0)


@dataclass(frozen=True)
class QuantizerParams:
    delta: float
    k: int
    k_prime: int

    @property
    def levels(self) -> np.ndarray:
        return quantizer_levels(self.k_prime)

    @property
    def disjoint(self) -> bool:
        """delta-neighborhoods of the levels are pairwise disjoint."""
        count = 2 ** self.k_prime
        return count == 1 or self.delta < 1.0 / (count - 1)


def quantizer_params(delta: float) -> QuantizerParams:
    return QuantizerParams(float(delta), k_delta(delta), k_prime_delta(delta))


def decode_levels(ys, bits: int) -> np.ndarray:
    """Index of the nearest quantizer level for each observation."""
    count = 2 ** bits
    ys = np.asarray(ys, dtype=float)
    if count == 1:
        return np.zeros(ys.shape, dtype=np.int64)
    idx = np.rint((ys + 1.0) * (count - 1) / 2.0)
    return np.clip(idx, 0, count - 1).astype(np.int64)


class EncoderPolicy(Policy):
    """Nonadaptive: measurement j reports digit j of the cell index as a level."""

    adaptive = False

    def __init__(self, cover: CoverSpec, delta: float, n: Optional[int] = None):
        if cover.target is None:
            raise InvalidInput("cover must record the problem it covers")
        self.cover = cover
        self.params = quantizer_params(delta)
        bits = self.params.k_prime
        N = len(cover)
        if bits == 0:
            if N != 1:
                raise ShapeMismatch("a zero-bit quantizer needs a one-cell cover")
            n = 0 if n is None else n
        else:
            steps = math.log2(N) / bits
            if N & (N - 1) or steps != int(steps):
                raise ShapeMismatch(f"{N} cells is not 2**(n*{bits}) for an integer n")
            if n is not None and n != int(steps):
                raise ShapeMismatch(f"{N} cells need n={int(steps)} steps, got {n}")
            n = int(steps)
        self.budget = n
        self.bits = bits
        centers = tuple(map(tuple, cover.centers))
        self.functionals = tuple(
            QuantizedCell(centers, cover.target, j, n, bits) for j in range(n))

    def choose_next(self, transcript):
        k = len(transcript)
        return self.functionals[k] if k < self.budget else None

    def encode(self, cell: int) -> np.ndarray:
        """Noise-free observation vector for a cell index."""
        base = 2 ** self.bits
        digits = [(cell // base ** (self.budget - 1 - j)) % base for j in range(self.budget)]
        return self.params.levels[digits] if self.budget else np.zeros(0)

    def decode(self, ys) -> np.ndarray:
        """Cell indices for observation vectors (last axis = measurements)."""
        ys = np.asarray(ys, dtype=float)
        digits = decode_levels(ys, self.bits)
        base = 2 ** self.bits
        weights = base ** np.arange(self.budget - 1, -1, -1, dtype=np.int64)
        return (digits * weights).sum(axis=-1)

    def reconstruct(self, transcript):
        return self.cover.centers[int(self.decode(transcript.ys))].copy()


def build_encoder_policy(cover: CoverSpec, delta: float, n: Optional[int] = None) -> EncoderPolicy:
    return EncoderPolicy(cover, delta, n)


# -- bisection over a ball cover ----------------------------------------------

def lipschitz_eta(prob: Problem, L: float, delta_plus: float) -> float:
    """Scale making the distance functionals L-Lipschitz: omega~(2 delta+/L) / delta+."""
    return spaces.modified_modulus(prob, 2.0 * delta_plus / L) / delta_plus


class BisectionPolicy(Policy):
    """Halve a cover of 2**n balls n times with distance-to-union functionals.

    If the observation exceeds -1 + delta the image is outside the tested half;
    otherwise it lies within delta*eta of it, and the tested half survives with
    its radius inflated by delta*eta.
    """

    def __init__(self, cover: CoverSpec, delta: float, delta_plus: float, eta: float,
                 L: Optional[float] = None):
        if cover.target is None:
            raise InvalidInput("cover must record the problem it covers")
        N = len(cover)
        if N & (N - 1):
            raise ShapeMismatch(f"bisection needs 2**n balls, got {N}")
        if not (0 <= delta < delta_plus <= 1):
            raise InvalidParameters("need 0 <= delta < delta_plus <= 1")
        if not eta > 0:
            raise InvalidParameters("eta must be positive")
        self.cover = cover
        self.problem = cover.target
        self.delta, self.delta_plus, self.eta = float(delta), float(delta_plus), float(eta)
        self.budget = N.bit_length() - 1
        self.declared = CONTINUOUS if L is None else lipschitz(L)

    @property
    def error_bound(self) -> float:
        return self.cover.radius + self.budget * self.delta * self.eta

    def state(self, transcript: Transcript):
        """(surviving ball indices, their current radius) after the transcript."""
        active = tuple(range(len(self.cover)))
        radius = self.cover.radius
        for st in transcript:
            half = len(active) // 2
            if st.y > -1.0 + self.delta:
                active = active[half:]
            else:
                active = active[:half]
                radius += self.delta * self.eta
        return active, radius

    def choose_next(self, transcript):
        if len(transcript) >= self.budget:
            return None
        active, radius = self.state(transcript)
        tested = self.cover.centers[list(active[:len(active) // 2])]
        return DistToUnion(tuple(map(tuple, tested)), radius, self.eta,
                           self.delta_plus * self.eta, self.problem, self.declared)

    def reconstruct(self, transcript):
        active, _ = self.state(transcript)
        return self.cover.centers[active[0]].copy()


def build_bisection_policy(cover: CoverSpec, delta: float, delta_plus: Optional[float] = None,
                           eta: Optional[float] = None, L: Optional[float] = None) -> BisectionPolicy:
    """Defaults: delta_plus = (1 + delta)/2; eta so that n*delta*eta = 0.01*radius,
    or the Lipschitz-compatible scale when ``L`` is given."""
    if delta_plus is None:
        delta_plus = (1.0 + delta) / 2.0
    n = len(cover).bit_length() - 1
    if eta is None:
        if L is not None:
            eta = lipschitz_eta(cover.target, L, delta_plus)
        elif n * delta > 0:
            eta = 0.01 * (cover.radius if cover.radius > 0 else 1.0) / (n * delta)
        else:
            eta = 1.0
    return BisectionPolicy(cover, delta, delta_plus, eta, L)


# -- coordinate refinement ------------------------------------------------------

class CoordRefinePolicy(Policy):
    """Refine each tracked quantity by repeated rescaled-residual measurements.

    Quantity i (a coordinate, or ``sources[i]`` when given) gets ``rounds[i]``
    measurements. Each anchors at the midpoint of the current uncertainty
    interval, so the residual never saturates for admissible noise. With
    ``clamp`` the intervals are intersected with [-1, 1] and with their
    previous value. The output is ``scale`` times the interval midpoints.
    """

    def __init__(self, rounds: Sequence[int], delta: float, scale=None, clamp: bool = True,
                 sources: Optional[Sequence[Optional[Functional]]] = None):
        if not 0 < delta < 1:
            raise InvalidParameters("delta must lie in (0, 1)")
        self.rounds = tuple(int(r) for r in rounds)
        if any(r < 0 for r in self.rounds) or not self.rounds:
            raise InvalidInput("rounds must be a nonempty list of nonnegative counts")
        self.delta = float(delta)
        self.scale = np.ones(len(self.rounds)) if scale is None else np.asarray(scale, float)
        self.clamp = clamp
        self.sources = tuple(sources) if sources is not None else (None,) * len(self.rounds)
        self.schedule = tuple((i, j) for i, r in enumerate(self.rounds) for j in range(1, r + 1))
        self.budget = len(self.schedule)

    def intervals(self, transcript: Transcript) -> np.ndarray:
        """Uncertainty intervals, shape (dim, 2), after the transcript."""
        iv = np.tile([-1.0, 1.0], (len(self.rounds), 1))
        d = self.delta
        for (i, j), st in zip(self.schedule, transcript):
            a = 0.5 * (iv[i, 0] + iv[i, 1])
            h = d ** (j - 1)
            lo, hi = a + h * (st.y - d), a + h * (st.y + d)
            if self.clamp:
                lo, hi = max(lo, iv[i, 0], -1.0), min(hi, iv[i, 1], 1.0)
                if lo > hi:
                    lo = hi = 0.5 * (lo + hi)
            iv[i] = lo, hi
        return iv

    def choose_next(self, transcript):
        k = len(transcript)
        if k >= self.budget:
            return None
        i, j = self.schedule[k]
        iv = self.intervals(transcript)
        anchor = float(0.5 * (iv[i, 0] + iv[i, 1]))
        return CoordRefine(i, anchor, j, self.delta, self.sources[i])

    def estimates(self, transcript) -> np.ndarray:
        iv = self.intervals(transcript)
        return 0.5 * (iv[:, 0] + iv[:, 1])

    def reconstruct(self, transcript):
        return self.scale * self.estimates(transcript)


def build_coord_refine_policy(m: int, r: int, delta: float, clamp: bool = True) -> CoordRefinePolicy:
    if m < 1 or r < 1:
        raise InvalidInput("need m >= 1 and r >= 1")
    return CoordRefinePolicy((r,) * m, delta, clamp=clamp)


def rounds_for_precision(eps: float, delta: float) -> int:
    """Smallest r with delta**r <= eps."""
    if not (0 < eps and 0 < delta < 1):
        raise InvalidParameters("need eps > 0 and 0 < delta < 1")
    if eps >= 1:
        return 1
    return max(1, nudged_ceil(math.log(eps) / math.log(delta)))


@dataclass
class Correction:
    value: float
    bound: float
    transcript: Transcript


def noise_correct(fn: Functional, f, r: int, adversary: NoiseAdversary,
                  prob: Optional[Problem] = None, delta: Optional[float] = None,
                  clamp: bool = True) -> Correction:
    """Estimate fn(f) to within delta**r from r noisy readings of refined functionals.

    ``delta`` is the design noise level (defaults to the adversary's).
    """
    delta = adversary.delta if delta is None else float(delta)
    if adversary.delta > delta:
        raise InvalidParameters("adversary noise exceeds the design noise level")
    if r < 1:
        raise InvalidInput("r must be at least 1")
    report = validate(fn, prob)
    if not report.class_consistent:
        raise AdmissibilityViolation(f"inner functional is not admissible as {fn.declared}")
    policy = CoordRefinePolicy((r,), delta, clamp=clamp, sources=(fn,))
    t, est = execute(policy, f, adversary, prob)
    return Correction(float(est[0]), delta ** r, t)


# -- diagonal operators ---------------------------------------------------------

class TruncationPolicy(Policy):
    """Read the first n coordinates once, output sigma_i * y_i and zeros after."""

    adaptive = False

    def __init__(self, prob: Diagonal, n: int):
        if not 0 <= n <= len(prob.sigma):
            raise InvalidInput("need 0 <= n <= len(sigma)")
        self.problem = prob
        self.budget = n
        self.functionals = tuple(coordinate(prob.dim, i) for i in range(n))

    def choose_next(self, transcript):
        k = len(transcript)
        return self.functionals[k] if k < self.budget else None

    def reconstruct(self, transcript):
        out = np.zeros(self.problem.dim)
        out[:self.budget] = self.problem.weights[:self.budget] * transcript.ys
        return out


def build_diag_truncation_policy(prob: Diagonal, n: int) -> TruncationPolicy:
    return TruncationPolicy(prob, n)


def _next_sigma(sigma, n, tail):
    return sigma[n] if n < len(sigma) else tail


def diag_truncation_error(sigma: Sequence[float], n: int, delta: float, p: float,
                          tail: float = 0.0) -> float:
    """Worst-case error of the truncation policy on the unit ball of l_p."""
    sigma = tuple(float(s) for s in sigma)
    if not 0 <= n <= len(sigma):
        raise InvalidInput("need 0 <= n <= len(sigma)")
    p = spaces.check_exponent(p)
    nxt = _next_sigma(sigma, n, tail)
    if p == spaces.INF:
        return max(delta * sigma[0] if n else 0.0, nxt)
    head = sum(s ** p for s in sigma[:n])
    return (delta ** p * head + nxt ** p) ** (1.0 / p)


def diag_l2noise_error(sigma: Sequence[float], n: int, delta: float, tail: float = 0.0) -> float:
    """Minimal linear error on l_2 when the noise vector is bounded in l_2 by delta."""
    sigma = tuple(float(s) for s in sigma)
    if not 0 <= n <= len(sigma):
        raise InvalidInput("need 0 <= n <= len(sigma)")
    if n == 0:
        return sigma[0]
    nxt = _next_sigma(sigma, n, tail)
    spread = sum(s * s - nxt * nxt for s in sigma[:n])
    return math.sqrt(nxt * nxt + delta * delta / n * spread)


def diag_l2noise_bracket(sigma, n: int, delta: float, tail: float = 0.0) -> tuple:
    """Bracket for the minimal linear error under coordinatewise noise delta on l_2."""
    return (diag_l2noise_error(sigma, n, delta, tail),
            diag_l2noise_error(sigma, n, delta * math.sqrt(max(n, 1)), tail))


@dataclass(frozen=True)
class AllocationPlan:
    eps: float
    delta: float
    m: int
    counts: tuple
    sigma: tuple

    @property
    def total(self) -> int:
        return sum(self.counts)

    def rows(self):
        return [(i + 1, self.sigma[i], c) for i, c in enumerate(self.counts)]

    def to_csv(self) -> str:
        lines = ["i,sigma_i,n_i"]
        lines += [f"{i},{s!r},{c}" for i, s, c in self.rows()]
        return "\n".join(lines) + "\n"


def diag_allocate(sigma: Sequence[float], eps: float, delta: float, tail: float = 0.0) -> AllocationPlan:
    """Measurement counts n_i = ceil(ln(sigma_i/eps) / ln(1/delta)) for i <= m.

    m is the first index with sigma_{m+1} <= eps; refining coordinate i that
    many times leaves uncertainty sigma_i * delta**n_i <= eps.
    """
    sigma = tuple(float(s) for s in sigma)
    if not eps > 0:
        raise InvalidParameters("eps must be positive")
    if not 0 < delta < 1:
        raise InvalidParameters("delta must lie in (0, 1)")
    if eps >= sigma[0]:
        return AllocationPlan(eps, delta, 0, (), sigma)
    m = next((k for k in range(1, len(sigma) + 1) if _next_sigma(sigma, k, tail) <= eps), None)
    if m is None:
        raise InfeasibleTruncation(f"tail bound {tail} exceeds eps={eps}")
    counts = tuple(max(1, nudged_ceil(math.log(sigma[i] / eps) / math.log(1.0 / delta)))
                   for i in range(m))
    return AllocationPlan(eps, delta, m, counts, sigma)


def build_allocation_policy(plan: AllocationPlan, prob: Diagonal) -> CoordRefinePolicy:
    """Coordinate refinement with the planned counts; unplanned coordinates output 0."""
    rounds = list(plan.counts) + [0] * (prob.dim - plan.m)
    return CoordRefinePolicy(rounds, plan.delta, scale=prob.weights)


def stirling_allocation_cost(s: float, m: int, delta: float) -> tuple:
    """For sigma_k = k**-s and eps = sigma_{m+1}: the exact log-cost term
    ln(sigma_1...sigma_m / eps**m) / ln(1/delta), its Stirling approximation,
    and the leading term s*log2(e)*(m+1)/log2(1/delta).
    """
    if m < 1 or not 0 < delta < 1:
        raise InvalidInput("need m >= 1 and 0 < delta < 1")
    L = math.log(1.0 / delta)
    exact = s * (m * math.log(m + 1) - math.lgamma(m + 1)) / L
    stirling = s * ((m + 1) - 0.5 * math.log(2 * math.pi * (m + 1))) / L
    leading = s * math.log2(math.e) * (m + 1) / math.log2(1.0 / delta)
    return exact, stirling, leading
