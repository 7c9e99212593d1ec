"""Lower-bound certifiers.

Each certifier returns witnesses (inputs with forced transcripts) that can be
re-checked independently: every forced observation must be admissible noise
for its witness, and the claimed bound must follow from the witnesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import spaces
from .errors import AdmissibilityViolation, ClassMismatch, InvalidParameters
from .measurement import (
    GridSnap,
    Policy,
    Transcript,
    k_delta,
    run_session,
    validate,
)
from .spaces import Problem

VERIFY_ATOL = 1e-12


@dataclass
class Witness:
    f: np.ndarray
    transcript: Transcript = field(default_factory=Transcript)
    output: Optional[np.ndarray] = None
    error: Optional[float] = None


@dataclass
class LowerBoundCertificate:
    kind: str  # grid_adversary | linear_floor | lipschitz_floor
    problem: Problem
    delta: float
    claimed_bound: float
    witnesses: list
    verified: bool = False
    details: dict = field(default_factory=dict)

    def rows(self):
        """CSV-ready rows: kind, bound, witness index, witness point, forced ys."""
        for i, w in enumerate(self.witnesses):
            yield (self.kind, repr(float(self.claimed_bound)), str(i),
                   " ".join(repr(float(v)) for v in w.f),
                   " ".join(repr(float(v)) for v in w.transcript.ys))


def _admissible(transcript: Transcript, f, delta: float) -> bool:
    return all(abs(st.y - st.functional(f)) <= delta for st in transcript)


def verify_certificate(cert: LowerBoundCertificate) -> bool:
    """Recheck every witness against the measurement model and the claimed bound."""
    prob, delta = cert.problem, cert.delta
    for w in cert.witnesses:
        if not spaces.in_domain(prob, w.f):
            return False
        if not _admissible(w.transcript, w.f, delta):
            return False
    if cert.kind == "grid_adversary":
        best = 0.0
        for w in cert.witnesses:
            if w.output is None:
                return False
            best = max(best, spaces.norm(spaces.apply_operator(prob, w.f) - w.output, prob.q))
        return best >= cert.claimed_bound - VERIFY_ATOL
    f, g = cert.witnesses[0].f, cert.witnesses[1].f
    if cert.witnesses[0].transcript != cert.witnesses[1].transcript:
        return False
    gap = spaces.norm(spaces.apply_operator(prob, f) - spaces.apply_operator(prob, g), prob.q)
    if gap / 2.0 < cert.claimed_bound - VERIFY_ATOL:
        return False
    if cert.kind == "linear_floor":
        # all-zero observations are admissible for every norm-one linear functional
        ok = all(spaces.norm(w.f, prob.p) <= delta * (1.0 + VERIFY_ATOL) for w in cert.witnesses)
        ok = ok and all(st.y == 0.0 for st in cert.witnesses[0].transcript)
    else:
        L = cert.details["L"]
        ok = L * spaces.norm(f - g, prob.p) <= 2.0 * delta
    achieved = cert.details.get("achieved")
    if achieved is not None:
        ok = ok and achieved >= cert.claimed_bound - VERIFY_ATOL
    return ok


def grid_adversary(policy: Policy, prob: Problem, delta: float, level: Optional[int] = None,
                   samples=None, keep: int = 3) -> LowerBoundCertificate:
    """Feed the policy grid-snapped values and report its largest error over sampled inputs.

    Every snapped value is within 2**-k_delta <= delta of the truth, so each
    session is a legitimate run and its error bounds the worst case from below.
    """
    if not 0 < delta < 1:
        raise InvalidParameters("delta must lie in (0, 1)")
    level = spaces.search_level(prob.dim) if level is None else level
    pts = spaces.domain_samples(prob, level) if samples is None else np.atleast_2d(samples)
    adv = GridSnap(delta)
    found = []
    for f in pts:
        res = run_session(policy, f, prob, adv)
        found.append(Witness(np.array(f), res.transcript, res.output, res.error))
    found.sort(key=lambda w: -w.error)
    cert = LowerBoundCertificate("grid_adversary", prob, delta, found[0].error, found[:keep],
                                 details={"k": adv.k, "level": level, "samples": len(pts),
                                          "resolution": spaces.sample_resolution(prob, level)})
    cert.verified = verify_certificate(cert)
    return cert


class _ForcedValueMiss(AdmissibilityViolation):
    """The shared observation is out of reach for one witness."""


def _twin_run(policy: Policy, f, g, prob: Problem, delta: float, rule: Callable,
              check: Callable) -> tuple:
    """Run ``policy`` once while answering for two inputs at the same time."""
    t = Transcript()
    while True:
        fn = policy.choose_next(t)
        if fn is None:
            break
        if len(t) >= policy.budget:
            raise AdmissibilityViolation("policy exceeded its budget")
        try:
            report = validate(fn, prob)
        except ClassMismatch as exc:
            raise AdmissibilityViolation(str(exc)) from exc
        check(fn, report)
        a, b = fn(f), fn(g)
        y = rule(a, b)
        if not (abs(y - a) <= delta and abs(y - b) <= delta):
            raise _ForcedValueMiss(
                f"forced value {y} is not admissible for both witnesses ({a}, {b})")
        t = t.append(fn, y)
    out = policy.reconstruct(t)
    errs = [spaces.norm(spaces.apply_operator(prob, x) - out, prob.q) for x in (f, g)]
    return t, out, errs


def _midpoint(a: float, b: float) -> float:
    """The float nearest (a + b)/2 that is most balanced between a and b."""
    y = 0.5 * (a + b)
    candidates = (y, math.nextafter(y, a), math.nextafter(y, b))
    return min(candidates, key=lambda v: max(abs(v - a), abs(v - b)))


def _extremal(prob: Problem) -> np.ndarray:
    if isinstance(prob, spaces.Identity):
        return spaces.extremal_vector(prob.p, prob.q, prob.m)
    return spaces.unit_vector(prob.dim, 0)


def _finish_twin(kind, prob, delta, bound, f, g, policy, rule, check, details):
    if policy is None:
        ws = [Witness(f), Witness(g)]
    else:
        t, out, errs = _twin_run(policy, f, g, prob, delta, rule, check)
        ws = [Witness(f, t, out, errs[0]), Witness(g, t, out, errs[1])]
        details["achieved"] = max(errs)
    cert = LowerBoundCertificate(kind, prob, delta, bound, ws, details=details)
    cert.verified = verify_certificate(cert)
    return cert


def linear_floor(prob: Problem, delta: float, policy: Optional[Policy] = None) -> LowerBoundCertificate:
    """delta * ||S||: the inputs +-delta x* give every norm-one linear functional a value
    within delta of 0, so all-zero observations cannot tell them apart."""
    if not 0 <= delta < 1:
        raise InvalidParameters("delta must lie in [0, 1)")
    x = _extremal(prob) * prob.domain_radius
    f, g = delta * x, -delta * x
    gap = spaces.norm(spaces.apply_operator(prob, f) - spaces.apply_operator(prob, g), prob.q)

    def check(fn, report):
        if report.declared.kind != "linear":
            raise AdmissibilityViolation(f"{fn.kind} is not a linear functional")

    return _finish_twin("linear_floor", prob, delta, gap / 2.0, f, g, policy,
                        lambda a, b: 0.0, check, {"norm": prob.op_norm})


def lipschitz_floor(prob: Problem, L: float, delta: float,
                    policy: Optional[Policy] = None) -> LowerBoundCertificate:
    """Half the modulus at 2*delta/L, witnessed by two inputs at that distance.

    Any L-Lipschitz functional differs by at most 2*delta on them, so the
    midpoint observation is admissible for both.
    """
    if not L > 0:
        raise InvalidParameters("L must be positive")
    if not 0 <= delta < 1:
        raise InvalidParameters("delta must lie in [0, 1)")
    spaces.modulus(prob, 0.0)  # raises for unsupported instances
    x = _extremal(prob)
    gamma = 2.0 * delta / L
    R = prob.domain_radius

    def pair(gam):
        if gam <= R:
            return np.zeros(prob.dim), gam * x
        t = min(gam / 2.0, R)
        return -t * x, t * x

    f, g = pair(gamma)
    while L * spaces.norm(f - g, prob.p) > 2.0 * delta:
        gamma = math.nextafter(gamma, 0.0)
        f, g = pair(gamma)
    gap = spaces.norm(spaces.apply_operator(prob, f) - spaces.apply_operator(prob, g), prob.q)

    def check(fn, report):
        if not report.lipschitz_estimate <= L * (1.0 + 1e-9):
            raise AdmissibilityViolation(
                f"{fn.kind} has Lipschitz constant {report.lipschitz_estimate} > {L}")

    # Functionals evaluated in floating point can differ by 2*delta plus a few
    # ulps on the witnesses; pulling them slightly closer restores admissibility.
    for _ in range(8):
        try:
            return _finish_twin("lipschitz_floor", prob, delta, gap / 2.0, f, g, policy,
                                _midpoint, check, {"L": L, "gamma": gamma,
                                                   "modulus": spaces.modulus(prob, gamma)})
        except _ForcedValueMiss:
            gamma *= 1.0 - 2.0 ** -40
            f, g = pair(gamma)
            gap = spaces.norm(spaces.apply_operator(prob, f) - spaces.apply_operator(prob, g), prob.q)
    raise AdmissibilityViolation("no admissible midpoint for the Lipschitz witnesses")
