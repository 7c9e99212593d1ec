"""Noisy adaptive information: functionals, adversaries, sessions, transcripts.

Functionals are a closed vocabulary of frozen dataclasses, so their range and
Lipschitz certificates are computed analytically rather than probed.
Every functional value is clamped to [-1, 1]; observed values are not.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from . import spaces
from .errors import (
    AdmissibilityViolation,
    ClassMismatch,
    InvalidInput,
    InvalidParameters,
    RangeViolation,
)
from .spaces import INF, Problem

LIP_RTOL = 1e-9
CEIL_NUDGE = 1e-12


def nudged_ceil(x: float) -> int:
    """Ceiling after a 1e-12 downward nudge, so log2(1/0.25) gives 2, not 3."""
    return math.ceil(x - CEIL_NUDGE)


def k_delta(delta: float) -> int:
    """Bits of the snapping grid: ceil(log2(1/delta)), with 2**-k <= delta enforced."""
    if not 0 < delta < 1:
        raise InvalidParameters("delta must lie in (0, 1)")
    k = max(nudged_ceil(math.log2(1.0 / delta)), 1)
    while 2.0 ** -k > delta:
        k += 1
    return k


# -- functional classes -----------------------------------------------------

@dataclass(frozen=True)
class FunctionalClass:
    kind: str  # linear | lipschitz | continuous | arbitrary
    L: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "lipschitz", "continuous", "arbitrary"):
            raise InvalidInput(f"unknown functional class {self.kind!r}")
        if self.kind == "lipschitz" and not (self.L is not None and self.L > 0):
            raise InvalidInput("lipschitz class needs L > 0")

    def __str__(self):
        return f"lipschitz({self.L!r})" if self.kind == "lipschitz" else self.kind

    @classmethod
    def parse(cls, text: str) -> "FunctionalClass":
        text = text.strip()
        if text.startswith("lipschitz(") and text.endswith(")"):
            return cls("lipschitz", float(text[len("lipschitz("):-1]))
        return cls(text)


LINEAR = FunctionalClass("linear")
CONTINUOUS = FunctionalClass("continuous")
ARBITRARY = FunctionalClass("arbitrary")


def lipschitz(L: float) -> FunctionalClass:
    return FunctionalClass("lipschitz", float(L))


@dataclass(frozen=True)
class Certificate:
    """Analytic facts about a functional on a domain ball."""

    linear: bool
    lipschitz: float  # inf when no Lipschitz bound exists
    range_lo: float
    range_hi: float


def _clamp(v: float) -> float:
    return -1.0 if v < -1.0 else (1.0 if v > 1.0 else v)


class Functional:
    """Base for the measurement vocabulary. Subclasses are frozen dataclasses."""

    kind = "functional"
    declared: FunctionalClass

    def raw(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def __call__(self, x) -> float:
        v = _clamp(float(self.raw(x)))
        assert -1.0 <= v <= 1.0
        return v

    def certificate(self, p: float, radius: float) -> Certificate:
        raise NotImplementedError

    def to_params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearForm(Functional):
    weights: tuple
    declared: FunctionalClass = LINEAR
    kind = "linear_form"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @cached_property
    def _w(self):
        return np.asarray(self.weights)

    def raw(self, x):
        return float(self._w @ x)

    def certificate(self, p, radius):
        d = spaces.dual_norm(self.weights, p)
        return Certificate(True, d, -radius * d, radius * d)

    def to_params(self):
        return {"weights": list(self.weights), "declared": str(self.declared)}


def coordinate(m: int, i: int) -> LinearForm:
    """The coordinate functional x -> x_i (0-based index)."""
    return LinearForm(tuple(spaces.unit_vector(m, i)))


@dataclass(frozen=True)
class DistToUnion(Functional):
    """(2/eta) * min(dist(S(f), union of balls), cap) - 1, with cap = delta_plus * eta."""

    centers: tuple
    radius: float
    eta: float
    cap: float
    problem: Problem
    declared: FunctionalClass = CONTINUOUS
    kind = "dist_to_union"

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(tuple(float(v) for v in c) for c in self.centers))
        if not self.centers:
            raise InvalidInput("empty center list")
        if self.eta <= 0 or self.cap < 0 or self.radius < 0:
            raise InvalidParameters("need eta > 0, cap >= 0, radius >= 0")

    @cached_property
    def _c(self):
        return np.asarray(self.centers)

    def raw(self, x):
        y = self.problem.weights * x
        d = max(float(np.min(spaces.pairwise_norm(self._c - y, self.problem.q))) - self.radius, 0.0)
        return (2.0 / self.eta) * min(d, self.cap) - 1.0

    def certificate(self, p, radius):
        lip = 2.0 / self.eta * self.problem.op_norm
        return Certificate(False, lip, -1.0, 2.0 * self.cap / self.eta - 1.0)

    def to_params(self):
        return {"centers": [list(c) for c in self.centers], "radius": self.radius,
                "eta": self.eta, "cap": self.cap, "problem": self.problem.to_dict(),
                "declared": str(self.declared)}


@dataclass(frozen=True)
class CoordRefine(Functional):
    """Rescaled residual around ``anchor`` at refinement level ``level`` (1-based).

    The refined quantity is the coordinate ``index`` of the input, or the value
    of ``inner`` when given. Beyond distance delta**(level-1) from the anchor
    the value saturates to the sign of the residual.
    """

    index: int
    anchor: float
    level: int
    delta: float
    inner: Optional[Functional] = None
    declared: Optional[FunctionalClass] = None
    kind = "coord_refine"

    def __post_init__(self):
        if self.level < 1:
            raise InvalidInput("level is 1-based")
        if not 0 < self.delta < 1:
            raise InvalidParameters("delta must lie in (0, 1)")
        if self.declared is None:
            object.__setattr__(self, "declared", lipschitz(self.scale_lipschitz))

    @property
    def scale_lipschitz(self) -> float:
        return self.delta ** (1 - self.level)

    def source(self, x) -> float:
        return float(x[self.index]) if self.inner is None else self.inner(x)

    def raw(self, x):
        r = self.source(x) - self.anchor
        if abs(r) <= self.delta ** (self.level - 1):
            return self.delta ** (1 - self.level) * r
        return 1.0 if r > 0 else -1.0

    def certificate(self, p, radius):
        inner = 1.0 if self.inner is None else self.inner.certificate(p, radius).lipschitz
        return Certificate(False, self.scale_lipschitz * inner, -1.0, 1.0)

    def to_params(self):
        d = {"index": self.index, "anchor": self.anchor, "level": self.level,
             "delta": self.delta, "declared": str(self.declared)}
        if self.inner is not None:
            d["inner"] = {"kind": self.inner.kind, "params": self.inner.to_params()}
        return d


def quantizer_levels(bits: int) -> np.ndarray:
    """2**bits equispaced levels on [-1, 1]; the single level 0 when bits == 0."""
    count = 2 ** bits
    if count == 1:
        return np.zeros(1)
    return -1.0 + 2.0 * np.arange(count) / (count - 1)


@dataclass(frozen=True)
class QuantizedCell(Functional):
    """Emit the level of digit ``step`` of the index of the cell containing f.

    Cells are the nearest-center partition of the image (ties to the lowest
    index). Indices are written big-endian in base 2**bits with ``n_steps``
    digits.
    """

    centers: tuple
    problem: Problem
    step: int
    n_steps: int
    bits: int
    declared: FunctionalClass = ARBITRARY
    kind = "quantized_cell"

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(tuple(float(v) for v in c) for c in self.centers))
        if not 0 <= self.step < self.n_steps or self.bits < 0:
            raise InvalidInput("need 0 <= step < n_steps and bits >= 0")

    @cached_property
    def _c(self):
        return np.asarray(self.centers, dtype=float)

    def cell_of(self, x) -> int:
        y = self.problem.weights * x
        return int(np.argmin(spaces.pairwise_norm(self._c - y, self.problem.q)))

    def digit(self, cell: int) -> int:
        base = 2 ** self.bits
        return (cell // base ** (self.n_steps - 1 - self.step)) % base

    def raw(self, x):
        return float(quantizer_levels(self.bits)[self.digit(self.cell_of(x))])

    def certificate(self, p, radius):
        lv = quantizer_levels(self.bits)
        lip = 0.0 if len(self.centers) == 1 or self.bits == 0 else INF
        return Certificate(False, lip, float(lv.min()), float(lv.max()))

    def to_params(self):
        return {"centers": [list(c) for c in self.centers], "problem": self.problem.to_dict(),
                "step": self.step, "n_steps": self.n_steps, "bits": self.bits,
                "declared": str(self.declared)}


@dataclass(frozen=True)
class AffineClamp(Functional):
    """clamp(a * inner + b, -1, 1)."""

    inner: Functional
    a: float
    b: float = 0.0
    declared: FunctionalClass = CONTINUOUS
    kind = "affine_clamp"

    def raw(self, x):
        return self.a * self.inner(x) + self.b

    def certificate(self, p, radius):
        c = self.inner.certificate(p, radius)
        lo, hi = sorted((self.a * c.range_lo + self.b, self.a * c.range_hi + self.b))
        linear = c.linear and self.b == 0.0 and lo >= -1.0 and hi <= 1.0
        return Certificate(linear, abs(self.a) * c.lipschitz, max(lo, -1.0), min(hi, 1.0))

    def to_params(self):
        return {"inner": {"kind": self.inner.kind, "params": self.inner.to_params()},
                "a": self.a, "b": self.b, "declared": str(self.declared)}


_KINDS = {cls.kind: cls for cls in (LinearForm, DistToUnion, CoordRefine, QuantizedCell, AffineClamp)}


def functional_from_params(kind: str, params: dict) -> Functional:
    """Inverse of ``Functional.to_params`` for the CSV transcript format."""
    params = dict(params)
    declared = FunctionalClass.parse(params.pop("declared"))
    if "problem" in params:
        params["problem"] = spaces.problem_from_dict(params["problem"])
    if "inner" in params:
        params["inner"] = functional_from_params(params["inner"]["kind"], params["inner"]["params"])
    if "centers" in params:
        params["centers"] = tuple(tuple(c) for c in params["centers"])
    if kind not in _KINDS:
        raise InvalidInput(f"unknown functional kind {kind!r}")
    return _KINDS[kind](declared=declared, **params)


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class ClassReport:
    range_ok: bool
    dual_norm: Optional[float]
    lipschitz_estimate: float
    class_consistent: bool
    declared: FunctionalClass


def validate(fn: Functional, prob: Optional[Problem] = None) -> ClassReport:
    """Check that ``fn`` maps the domain ball into [-1, 1] and fits its declared class.

    Without a problem the domain is the unit ball of l_inf. Raises
    ClassMismatch when a functional declared linear is not linear with dual
    norm at most 1.
    """
    p = INF if prob is None else prob.p
    radius = 1.0 if prob is None else prob.domain_radius
    cert = fn.certificate(p, radius)
    range_ok = cert.range_lo >= -1.0 and cert.range_hi <= 1.0
    decl = fn.declared
    dual = cert.lipschitz if cert.linear else None
    if decl.kind == "linear":
        consistent = cert.linear and cert.lipschitz * radius <= 1.0
    elif decl.kind == "lipschitz":
        consistent = cert.lipschitz <= decl.L * (1.0 + LIP_RTOL)
    elif decl.kind == "continuous":
        consistent = cert.lipschitz < INF
    else:
        consistent = True
    report = ClassReport(range_ok, dual, cert.lipschitz, consistent and range_ok, decl)
    if decl.kind == "linear" and not report.class_consistent:
        exc = ClassMismatch(f"{fn.kind} declared linear is not an admissible linear functional"
                            f" (linear={cert.linear}, norm={cert.lipschitz})")
        exc.report = report
        raise exc
    return report


# -- adversaries --------------------------------------------------------------

@dataclass(frozen=True)
class NoiseAdversary:
    """Deterministic noise of magnitude at most ``delta``; subclasses pick the shift."""

    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise InvalidParameters("noise level must satisfy 0 <= delta < 1")

    def propose(self, value: float, step: int) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroNoise(NoiseAdversary):
    def propose(self, value, step):
        return value


@dataclass(frozen=True)
class FixedShift(NoiseAdversary):
    shift: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if abs(self.shift) > self.delta:
            raise InvalidParameters("|shift| must not exceed delta")

    def propose(self, value, step):
        return value + self.shift


@dataclass(frozen=True)
class SignPattern(NoiseAdversary):
    """y_k = value + signs[k] * delta; steps past the pattern get no noise."""

    signs: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "signs", tuple(float(s) for s in self.signs))
        if any(abs(s) > 1 for s in self.signs):
            raise InvalidParameters("signs must lie in [-1, 1]")

    def propose(self, value, step):
        s = self.signs[step] if step < len(self.signs) else 0.0
        return value + s * self.delta


@dataclass(frozen=True)
class SeededRandom(NoiseAdversary):
    """Uniform shift in [-delta, delta] from a Philox stream keyed by seed, countered by step."""

    seed: int = 0

    def propose(self, value, step):
        gen = np.random.Generator(np.random.Philox(key=self.seed, counter=step))
        return value + self.delta * (2.0 * gen.random() - 1.0)


@dataclass(frozen=True)
class GridSnap(NoiseAdversary):
    """Snap the true value to the grid w_i = -1 + (2i-1) 2**-k, i = 1..2**k.

    Cells are [w_i - 2**-k, w_i + 2**-k), the top cell also contains 1.
    """

    k: Optional[int] = None

    def __post_init__(self):
        super().__post_init__()
        if self.k is None:
            object.__setattr__(self, "k", k_delta(self.delta))
        if 2.0 ** -self.k > self.delta:
            raise InvalidParameters("grid half-spacing 2**-k exceeds delta")

    def grid(self) -> np.ndarray:
        h = 2.0 ** -self.k
        return -1.0 + (2.0 * np.arange(1, 2 ** self.k + 1) - 1.0) * h

    def propose(self, value, step):
        count = 2 ** self.k
        i = min(int(math.floor((value + 1.0) * count / 2.0)), count - 1)
        i = max(i, 0)
        return -1.0 + (2 * i + 1) * 2.0 ** -self.k


@dataclass(frozen=True)
class SearchDriven(NoiseAdversary):
    """Replays shifts (in units of delta) found by a worst-case search."""

    shifts: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "shifts", tuple(float(s) for s in self.shifts))
        if any(abs(s) > 1 for s in self.shifts):
            raise InvalidParameters("shifts must lie in [-1, 1]")

    def propose(self, value, step):
        s = self.shifts[step] if step < len(self.shifts) else 0.0
        return value + s * self.delta


@dataclass(frozen=True)
class Scripted(NoiseAdversary):
    """Emit prescribed observations verbatim; inadmissible ones raise."""

    values: tuple = ()

    def propose(self, value, step):
        return float(self.values[step])


def _enforce(value: float, y: float, delta: float) -> float:
    if abs(y - value) <= delta:
        return y
    y = value + max(-delta, min(delta, y - value))
    while abs(y - value) > delta:
        y = math.nextafter(y, value)
    return y


def observe(true_value: float, adversary: NoiseAdversary, history=0) -> float:
    """One noisy reading: |y - true_value| <= delta holds exactly in floating point."""
    if abs(true_value) > 1.0:
        raise RangeViolation(f"functional value {true_value} outside [-1, 1]")
    step = history if isinstance(history, int) else len(history)
    y = float(adversary.propose(true_value, step))
    if isinstance(adversary, Scripted):
        if not abs(y - true_value) <= adversary.delta:
            raise AdmissibilityViolation(
                f"scripted value {y} is {abs(y - true_value)} away from {true_value}")
        return y
    return _enforce(true_value, y, adversary.delta)


# -- transcripts and policies -----------------------------------------------

@dataclass(frozen=True)
class Step:
    functional: Functional
    y: float


@dataclass(frozen=True)
class Transcript:
    steps: tuple = ()

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def append(self, functional: Functional, y: float) -> "Transcript":
        return Transcript(self.steps + (Step(functional, float(y)),))

    def prefix(self, k: int) -> "Transcript":
        return Transcript(self.steps[:k])

    @property
    def ys(self) -> np.ndarray:
        return np.array([s.y for s in self.steps], dtype=float)

    @property
    def functionals(self) -> tuple:
        return tuple(s.functional for s in self.steps)


class Policy:
    """An adaptive information rule plus a reconstruction map.

    ``choose_next`` must depend on the transcript only, so replaying a
    transcript reproduces the functional sequence.
    """

    budget: int = 0
    adaptive: bool = True

    def choose_next(self, transcript: Transcript) -> Optional[Functional]:
        raise NotImplementedError

    def reconstruct(self, transcript: Transcript) -> np.ndarray:
        raise NotImplementedError


class ConstantPolicy(Policy):
    """No measurements; always returns ``output``."""

    adaptive = False
    budget = 0

    def __init__(self, output):
        self.output = spaces.as_point(output)

    def choose_next(self, transcript):
        return None

    def reconstruct(self, transcript):
        return self.output.copy()


@dataclass
class SessionResult:
    transcript: Transcript
    output: np.ndarray
    error: float


def execute(policy: Policy, f, adversary: NoiseAdversary, prob: Optional[Problem] = None):
    """Run the measurement loop; returns (transcript, output)."""
    f = spaces.as_point(f)
    t = Transcript()
    while True:
        fn = policy.choose_next(t)
        if fn is None:
            break
        if len(t) >= policy.budget:
            raise AdmissibilityViolation(f"policy exceeded its budget of {policy.budget}")
        try:
            report = validate(fn, prob)
        except ClassMismatch as exc:
            raise AdmissibilityViolation(str(exc)) from exc
        if not report.class_consistent:
            raise AdmissibilityViolation(
                f"{fn.kind} is not admissible as {fn.declared}"
                f" (range_ok={report.range_ok}, lipschitz={report.lipschitz_estimate})")
        t = t.append(fn, observe(fn(f), adversary, len(t)))
    return t, policy.reconstruct(t)


def run_session(policy: Policy, f, prob: Problem, adversary: NoiseAdversary) -> SessionResult:
    """One run of ``policy`` on input ``f``; error measured in the target norm."""
    f = spaces.as_point(f)
    truth = spaces.apply_operator(prob, f)
    t, out = execute(policy, f, adversary, prob)
    return SessionResult(t, out, spaces.norm(truth - out, prob.q))


def replay_matches(policy: Policy, transcript: Transcript) -> bool:
    """True iff feeding the observed values back reproduces every functional."""
    for k, st in enumerate(transcript.steps):
        if policy.choose_next(transcript.prefix(k)) != st.functional:
            return False
    return policy.choose_next(transcript) is None


def exploit_unbounded_range(fn: Functional, f, adversary: NoiseAdversary, delta1: float,
                            *, range_clamp: bool = True) -> float:
    """Read an unclamped functional to precision ``delta1`` from one observation.

    Measures eta * fn(f) with eta = delta / delta1 and divides the reading by
    eta. Only meaningful with the [-1, 1] clamp switched off, which is the
    point: with the clamp on, this raises RangeViolation.
    """
    if range_clamp:
        raise RangeViolation("functional range is clamped to [-1, 1]; disable the clamp to demo")
    if not delta1 > 0:
        raise InvalidParameters("target precision must be positive")
    delta = adversary.delta
    if delta == 0:
        return float(fn.raw(spaces.as_point(f)))
    eta = delta / delta1
    v = eta * float(fn.raw(spaces.as_point(f)))
    y1 = _enforce(v, float(adversary.propose(v, 0)), delta)
    return y1 / eta


# -- CSV serialization --------------------------------------------------------

CSV_HEADER = ("sessionId", "step", "functionalKind", "functionalParamsJSONText", "y")


def transcript_rows(session_id, transcript: Transcript):
    for k, st in enumerate(transcript.steps):
        yield (str(session_id), str(k), st.functional.kind,
               json.dumps(st.functional.to_params(), sort_keys=True), repr(float(st.y)))


def write_transcripts_csv(sessions: Iterable, out=None) -> str:
    """Write (sessionId, transcript) pairs; returns the CSV text, also written to ``out`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for sid, t in sessions:
        w.writerows(transcript_rows(sid, t))
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def read_transcripts_csv(text_or_path: str) -> dict:
    """Parse transcript CSV into {sessionId: Transcript}."""
    if "\n" not in text_or_path:
        with open(text_or_path, newline="") as fh:
            text_or_path = fh.read()
    rows = list(csv.reader(io.StringIO(text_or_path)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise InvalidInput("missing or malformed transcript header")
    out: dict = {}
    for sid, step, kind, params, y in rows[1:]:
        t = out.get(sid, Transcript())
        if int(step) != len(t):
            raise InvalidInput(f"session {sid}: step {step} out of order")
        out[sid] = t.append(functional_from_params(kind, json.loads(params)), float(y))
    return out
