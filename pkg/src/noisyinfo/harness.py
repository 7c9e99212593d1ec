"""Worst-case error search, reproducible sweeps, and information-class comparisons."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import algorithms, bounds, entropy, spaces
from .errors import InvalidInput, InvalidParameters
from .measurement import GridSnap, NoiseAdversary, Policy, SignPattern, run_session
from .spaces import INF, Diagonal, Identity, Problem

SANDWICH_ATOL = 1e-9

# Descriptive tags naming the result each theory column comes from.
REF_REFINE = "coordinate-refinement-exact"
REF_TRUNCATION = "diagonal-truncation-closed-form"
REF_ARBITRARY = "entropy-sandwich-arbitrary"
REF_BISECTION = "bisection-entropy-upper"
REF_ALLOCATION = "diagonal-allocation-cost"
REF_LIN_FLOOR = "linear-noise-floor"
REF_LIP_FLOOR = "lipschitz-modulus-floor"


@dataclass
class ErrorReport:
    n: int
    delta: float
    estimated: float
    analytic_upper: Optional[float] = None
    certified_lower: Optional[float] = None
    theory_refs: tuple = ()
    exhaustive: bool = False
    witness_f: Optional[np.ndarray] = None
    witness_noise: Optional[tuple] = None
    sessions: int = 0

    def sandwich_ok(self, atol: float = SANDWICH_ATOL) -> bool:
        ok = True
        if self.certified_lower is not None:
            ok &= self.certified_lower <= self.estimated + atol
        if self.analytic_upper is not None:
            ok &= self.estimated <= self.analytic_upper + atol
        return bool(ok)


def input_samples(prob: Problem, level: Optional[int] = None) -> np.ndarray:
    level = spaces.search_level(prob.dim) if level is None else level
    return spaces.domain_samples(prob, level)


def _project(prob: Problem, x: np.ndarray) -> np.ndarray:
    nrm = spaces.norm(x, prob.p)
    r = prob.domain_radius
    return x if nrm <= r else x * (r / nrm)


def estimate_worst_error(policy: Policy, prob: Problem, delta: float, budget: int = 64,
                         seed: int = 0, level: Optional[int] = None, samples=None,
                         analytic_upper: Optional[float] = None,
                         certified_lower: Optional[float] = None,
                         theory_refs: Sequence[str] = (), exhaustive_limit: int = 16,
                         extra_adversaries: Sequence[NoiseAdversary] = ()) -> ErrorReport:
    """Search for the largest session error of ``policy`` under noise ``delta``.

    Inputs: the domain grid (with the points +-R e_i) or ``samples``. Noise:
    every +-delta pattern when the budget n is at most ``exhaustive_limit``,
    otherwise seeded random patterns refined by single-sign flips; the
    grid-snapping adversary is always tried as well. ``budget`` extra sessions
    then perturb the best input. The result is a lower estimate of the
    supremum; ``exhaustive`` only says every sign pattern was tried.
    """
    if budget < 1:
        raise InvalidInput("search budget must be at least 1")
    if not 0 <= delta < 1:
        raise InvalidParameters("delta must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    pts = input_samples(prob, level) if samples is None else np.atleast_2d(np.asarray(samples, float))
    n = policy.budget
    exhaustive = n <= exhaustive_limit
    if delta == 0:
        patterns = [()]
    elif exhaustive:
        patterns = list(itertools.product((-1.0, 1.0), repeat=n))
    else:
        patterns = [(1.0,) * n, (-1.0,) * n]
        patterns += [tuple(rng.choice((-1.0, 1.0), size=n)) for _ in range(budget)]
    advs = [SignPattern(delta, s) for s in patterns]
    if delta > 0:
        advs.append(GridSnap(delta))
    advs.extend(extra_adversaries)

    best = (-1.0, None, None)
    count = 0

    def run(f, adv):
        nonlocal best, count
        count += 1
        err = run_session(policy, f, prob, adv).error
        if err > best[0]:
            best = (err, np.array(f), adv)
        return err

    for f in pts:
        for adv in advs:
            run(f, adv)

    if not exhaustive and delta > 0:
        # flip single signs of the best pattern while that helps
        improved, rounds = True, 0
        while improved and rounds < budget:
            improved, rounds = False, rounds + 1
            err0, f0, adv0 = best
            if not isinstance(adv0, SignPattern):
                break
            for i in range(n):
                s = list(adv0.signs)
                s[i] = -s[i]
                if run(f0, SignPattern(delta, tuple(s))) > err0:
                    improved = True
                    break

    # random perturbation of the best input
    step = prob.domain_radius / 2 ** (spaces.search_level(prob.dim) if level is None else level)
    for _ in range(budget):
        err0, f0, adv0 = best
        cand = _project(prob, f0 + step * rng.uniform(-1.0, 1.0, size=f0.size))
        run(cand, adv0)
        step *= 0.97

    err, f, adv = best
    noise = adv.signs if isinstance(adv, SignPattern) else (type(adv).__name__,)
    return ErrorReport(n, delta, err, analytic_upper, certified_lower, tuple(theory_refs),
                       exhaustive, f, noise, count)


# -- sweeps -------------------------------------------------------------------

SWEEP_HEADER = ("experiment", "kind", "m", "n", "p", "q", "delta", "param",
                "error_est", "lower_cert", "upper_theory", "theory_ref")

SWEEP_KINDS = ("refine", "diag", "encoder", "bisect", "allocate")


def _parse_list(value, conv):
    if isinstance(value, (list, tuple)):
        return [conv(v) for v in value]
    text = str(value).strip()
    if not text:
        return []
    if ":" in text and conv is int and "," not in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [conv(v) for v in text.split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    """One sweep. List-valued fields accept Python lists or "a,b,c" / "lo:hi" text."""

    kind: str
    experiment: str = "sweep"
    m: list = field(default_factory=lambda: [1])
    n: list = field(default_factory=lambda: [1])
    delta: list = field(default_factory=lambda: [0.5])
    p: float = INF
    q: float = INF
    sigma: str = "power:1"
    sigma_length: int = 8
    eps: list = field(default_factory=lambda: [0.25])
    seed: int = 0
    budget: int = 16
    level: Optional[int] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise InvalidInput(f"unknown sweep kind {self.kind!r}; expected one of {SWEEP_KINDS}")
        self.m = _parse_list(self.m, int)
        self.n = _parse_list(self.n, int)
        self.delta = _parse_list(self.delta, float)
        self.eps = _parse_list(self.eps, float)
        self.p = spaces.parse_exponent(self.p)
        self.q = spaces.parse_exponent(self.q)
        if any(d >= 1 or d < 0 for d in self.delta):
            raise InvalidParameters("every delta must lie in [0, 1)")

    @classmethod
    def from_mapping(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidInput(f"unknown config keys: {sorted(extra)}")
        kw = dict(d)
        for key in ("seed", "budget", "sigma_length"):
            if key in kw:
                kw[key] = int(kw[key])
        if kw.get("level") not in (None, ""):
            kw["level"] = int(kw["level"])
        else:
            kw.pop("level", None)
        return cls(**kw)


def row_seed(master: int, row: int) -> int:
    """Stable per-row seed: first word of numpy's SeedSequence([master, row])."""
    return int(np.random.SeedSequence([master, row]).generate_state(1)[0])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if v == INF:
            return "inf"
        return repr(v)
    return str(v)


def _grid(cfg: ExperimentConfig):
    if cfg.kind in ("diag", "allocate"):
        return [(None, n, d) for n in (cfg.n if cfg.kind == "diag" else cfg.eps) for d in cfg.delta]
    return [(m, n, d) for m in cfg.m for n in cfg.n for d in cfg.delta]


def _sweep_row(cfg: ExperimentConfig, m, n, delta, seed):
    """Returns (m, n, p, q, param, est, lower, upper, ref) or None when not applicable."""
    est_kw = dict(budget=cfg.budget, seed=seed, level=cfg.level)
    if cfg.kind == "refine":
        r = n
        prob = Identity(INF, INF, m)
        d = delta if delta > 0 else 0.5
        pol = algorithms.build_coord_refine_policy(m, r, d)
        rep = estimate_worst_error(pol, prob, delta, **est_kw)
        lower = bounds.lipschitz_floor(prob, d ** (1 - r), delta).claimed_bound
        return m, r * m, INF, INF, r, rep.estimated, lower, delta ** r, REF_REFINE
    if cfg.kind == "diag":
        sigma, tail = spaces.load_sigma(cfg.sigma, cfg.sigma_length)
        if n > len(sigma):
            return None
        prob = Diagonal(sigma, tail, cfg.p)
        pol = algorithms.build_diag_truncation_policy(prob, n)
        rep = estimate_worst_error(pol, prob, delta, **est_kw)
        lower = bounds.linear_floor(prob, delta).claimed_bound
        upper = algorithms.diag_truncation_error(sigma, n, delta, cfg.p, tail)
        return prob.dim, n, cfg.p, cfg.p, "", rep.estimated, lower, upper, REF_TRUNCATION
    if cfg.kind == "allocate":
        eps = n
        sigma, tail = spaces.load_sigma(cfg.sigma, cfg.sigma_length)
        prob = Diagonal(sigma, tail, INF)
        plan = algorithms.diag_allocate(sigma, eps, delta, tail)
        pol = algorithms.build_allocation_policy(plan, prob)
        rep = estimate_worst_error(pol, prob, delta, **est_kw)
        lower = bounds.linear_floor(prob, delta).claimed_bound if plan.total == 0 else None
        return prob.dim, plan.total, INF, INF, eps, rep.estimated, lower, eps, REF_ALLOCATION
    prob = Identity(INF, INF, m)
    if cfg.kind == "encoder":
        if not delta > 0:
            return None
        bits = n * algorithms.k_prime_delta(delta)
        if bits % m:
            return None
        cover = entropy.grid_cover_linf(m, bits)
        pol = algorithms.build_encoder_policy(cover, delta)
        upper = cover.radius
        ref = REF_ARBITRARY
    else:
        if n % m:
            return None
        cover = entropy.grid_cover_linf(m, n)
        pol = algorithms.build_bisection_policy(cover, delta)
        upper = pol.error_bound
        ref = REF_BISECTION
    rep = estimate_worst_error(pol, prob, delta, **est_kw)
    lower = bounds.grid_adversary(pol, prob, delta, level=cfg.level).claimed_bound if delta > 0 else None
    return m, n, INF, INF, "", rep.estimated, lower, upper, ref


def sweep(cfg: ExperimentConfig) -> str:
    """Run every grid point of the config and return the CSV text (also written to cfg.out)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for idx, (m, n, delta) in enumerate(_grid(cfg)):
        row = _sweep_row(cfg, m, n, delta, row_seed(cfg.seed, idx))
        if row is None:
            continue
        mm, nn, p, q, param, est, lower, upper, ref = row
        w.writerow([cfg.experiment, cfg.kind, _fmt(mm), _fmt(nn), _fmt(p), _fmt(q), _fmt(float(delta)),
                    _fmt(param), _fmt(float(est)), _fmt(lower), _fmt(upper), ref])
    text = buf.getvalue()
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    return text


# -- information-class comparison ---------------------------------------------

@dataclass(frozen=True)
class CompareRow:
    info_class: str
    quantity: str
    value: float
    status: str  # computed | citation-only
    theory_ref: str


COMPARE_HEADER = ("class", "quantity", "value", "status", "theory_ref")


def _bits_needed(prob: Problem, eps: float, limit: int = 4096) -> Optional[int]:
    """Smallest n whose entropy number is certainly at most eps (exact or 6x formula)."""
    for n in range(limit + 1):
        if isinstance(prob, Identity) and prob.p == prob.q == INF:
            val = 2.0 ** (-n / prob.m)
        else:
            val, band = entropy.reference_formula(prob, n)
            if band is None:
                return None
            val *= band[1]
        if val <= eps:
            return n
    return None


def compare_settings(prob: Problem, delta: float, eps: float, n: Optional[int] = None) -> list:
    """Per information class: noise floors and measurement counts implied by the theory.

    Rows marked ``citation-only`` restate asymptotic results whose constants
    are unknown; they are not computed guarantees.
    """
    if not 0 <= delta < 1:
        raise InvalidParameters("the model requires 0 <= delta < 1")
    if not eps > 0:
        raise InvalidParameters("eps must be positive")
    rows = []
    floor = delta * prob.op_norm * prob.domain_radius
    rows.append(CompareRow("linear", "error_floor", floor, "computed", REF_LIN_FLOOR))
    if isinstance(prob, Diagonal) and prob.p == INF:
        if floor <= eps:
            need = next((k for k in range(len(prob.sigma) + 1) if prob.sigma_at(k + 1) <= eps), None)
            rows.append(CompareRow("linear", "n_required", math.nan if need is None else float(need),
                                   "computed", REF_TRUNCATION))
        else:
            rows.append(CompareRow("linear", "n_required", INF, "computed", REF_LIN_FLOOR))
        if n is not None and n <= len(prob.sigma):
            rows.append(CompareRow("linear", f"error_at_n={n}",
                                   algorithms.diag_truncation_error(prob.sigma, n, delta, INF, prob.tail),
                                   "computed", REF_TRUNCATION))
    bits = _bits_needed(prob, eps)
    if delta == 0 and isinstance(prob, Identity) and prob.p == prob.q == INF:
        rows.append(CompareRow("continuous", "n_sufficient_any_eps",
                               float(math.ceil(math.log2(prob.m + 1)) + 1),
                               "citation-only", "noise-free-continuous-log-m"))
    elif bits is not None:
        rows.append(CompareRow("continuous", "n_required_upper", float(bits), "computed", REF_BISECTION))
    if delta > 0:
        kp = algorithms.k_prime_delta(delta)
        if bits is None:
            pass
        elif kp == 0:
            rows.append(CompareRow("arbitrary", "n_required_upper", 0.0 if bits == 0 else INF,
                                   "computed", REF_ARBITRARY))
        else:
            rows.append(CompareRow("arbitrary", "n_required_upper", float(math.ceil(bits / kp)),
                                   "computed", REF_ARBITRARY))
        rows.append(CompareRow("arbitrary", "bits_per_measurement", float(kp), "computed", REF_ARBITRARY))
    if isinstance(prob, Identity) and prob.p < prob.q and n is not None and n > 0:
        rows.append(CompareRow("entropy", f"asymptotic_shape_at_n={n}",
                               entropy.reference_formula(prob, n)[0],
                               "citation-only", "identity-entropy-asymptotics"))
    if isinstance(prob, Diagonal) and delta > 0:
        rows.append(CompareRow("continuous", "small_delta_behavior", math.nan,
                               "citation-only", "continuous-small-noise-open"))
    return rows


def compare_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_HEADER)
    for r in rows:
        w.writerow([r.info_class, r.quantity, _fmt(float(r.value)), r.status, r.theory_ref])
    return buf.getvalue()
