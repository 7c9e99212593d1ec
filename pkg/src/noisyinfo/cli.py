"""Command-line interface: ``noisyinfo <subcommand> [flags]``.

Exit status is 0 on success, 2 when a verification fails, 1 on usage errors.
A ``--config`` file of ``key=value`` lines supplies defaults that explicit
flags override.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import algorithms, bounds, entropy, harness, spaces
from .errors import InconsistencyReport, NoisyInfoError
from .measurement import SeededRandom, SignPattern, run_session, write_transcripts_csv
from .spaces import INF, Diagonal, Identity

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2

COMMON = ("m", "n", "delta", "p", "q", "sigma", "eps", "seed", "budget", "out")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "inf" if v == INF else repr(v)


def _emit(rows, header, out=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([x if isinstance(x, str) else _num(x) for x in r])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


class Opts:
    """Merged view of config values and flags with typed accessors."""

    def __init__(self, ns, config):
        self.values = dict(config)
        for k, v in vars(ns).items():
            if v is not None:
                self.values[k] = v

    def raw(self, key, default=None):
        return self.values.get(key, default)

    def int(self, key, default=None):
        v = self.raw(key, default)
        if v is None:
            raise UsageError(f"--{key} is required")
        return int(v)

    def float(self, key, default=None):
        v = self.raw(key, default)
        if v is None:
            raise UsageError(f"--{key} is required")
        return float(v)

    def exp(self, key, default="inf"):
        return spaces.parse_exponent(self.raw(key, default))

    def ints(self, key, default=None):
        v = self.raw(key, default)
        if v is None:
            raise UsageError(f"--{key} is required")
        return harness._parse_list(str(v), int)

    def problem(self):
        sigma = self.raw("sigma")
        if sigma is not None:
            s, tail = spaces.load_sigma(str(sigma), self.int("sigma_length", 8))
            return Diagonal(s, tail, self.exp("p"))
        return Identity(self.exp("p"), self.exp("q"), self.int("m", 1))


def _sample_sessions(policy, prob, delta, seed, count=4):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(count, prob.dim))
    out = []
    for i, x in enumerate(pts):
        x = x * min(1.0, prob.domain_radius / spaces.norm(x, prob.p))
        res = run_session(policy, x, prob, SeededRandom(delta, seed + i))
        out.append((f"s{i}", res.transcript))
    return out


def cmd_encode(o: Opts) -> int:
    m, n, delta, seed = o.int("m", 1), o.int("n", 2), o.float("delta", 0.4), o.int("seed", 0)
    kp = algorithms.k_prime_delta(delta)
    bits = n * kp
    prob = Identity(INF, INF, m)
    cover = entropy.grid_cover_linf(m, bits)
    pol = algorithms.build_encoder_policy(cover, delta)
    failures = 0
    rng = np.random.default_rng(seed)
    draws = o.int("budget", 64)
    for cell in range(len(cover)):
        clean = pol.encode(cell)
        noisy = [clean + delta * np.array(s) for s in spaces.iter_sign_vectors(n)] if n else [clean]
        noisy += [clean + delta * rng.uniform(-1, 1, size=n) for _ in range(draws)]
        failures += int(np.sum(pol.decode(np.array(noisy)) != cell))
    rep = harness.estimate_worst_error(pol, prob, delta, budget=draws, seed=seed)
    _emit([(m, n, delta, kp, cover.radius, rep.estimated, failures)],
          ("m", "n", "delta", "k_prime", "cover_radius", "error_est", "decode_failures"), o.raw("out"))
    _maybe_transcripts(o, pol, prob, delta, seed)
    return EXIT_VERIFY if failures or rep.estimated > cover.radius + 1e-9 else EXIT_OK


def _maybe_transcripts(o, pol, prob, delta, seed):
    path = o.raw("transcripts")
    if path:
        write_transcripts_csv(_sample_sessions(pol, prob, delta, seed), path)


def cmd_bisect(o: Opts) -> int:
    m, n, delta, seed = o.int("m", 2), o.int("n", 2), o.float("delta", 0.3), o.int("seed", 0)
    prob = Identity(INF, INF, m)
    cover = entropy.grid_cover_linf(m, n)
    pol = algorithms.build_bisection_policy(cover, delta)
    rep = harness.estimate_worst_error(pol, prob, delta, budget=o.int("budget", 32), seed=seed)
    _emit([(m, n, delta, pol.delta_plus, pol.eta, cover.radius, pol.error_bound, rep.estimated)],
          ("m", "n", "delta", "delta_plus", "eta", "cover_radius", "error_bound", "error_est"),
          o.raw("out"))
    _maybe_transcripts(o, pol, prob, delta, seed)
    return EXIT_VERIFY if rep.estimated > pol.error_bound + 1e-9 else EXIT_OK


def cmd_refine(o: Opts) -> int:
    m, delta, seed = o.int("m", 1), o.float("delta", 0.5), o.int("seed", 0)
    eps = o.raw("eps")
    r = algorithms.rounds_for_precision(float(eps), delta) if eps is not None else o.int("n", 2)
    prob = Identity(INF, INF, m)
    pol = algorithms.build_coord_refine_policy(m, r, delta)
    rep = harness.estimate_worst_error(pol, prob, delta, budget=o.int("budget", 32), seed=seed)
    bound = delta ** r
    _emit([(m, r, delta, r * m, bound, rep.estimated)],
          ("m", "r", "delta", "n", "bound", "error_est"), o.raw("out"))
    _maybe_transcripts(o, pol, prob, delta, seed)
    return EXIT_VERIFY if rep.estimated > bound + 1e-12 else EXIT_OK


def cmd_diag(o: Opts) -> int:
    if o.raw("sigma") is None:
        raise UsageError("--sigma is required")
    prob = o.problem()
    delta = o.float("delta", 0.0)
    if o.raw("eps") is not None:
        plan = algorithms.diag_allocate(prob.sigma, o.float("eps"), delta, prob.tail)
        text = plan.to_csv()
        if o.raw("out"):
            Path(o.raw("out")).write_text(text)
        sys.stdout.write(text)
        return EXIT_OK
    rows, status = [], EXIT_OK
    for n in o.ints("n", "1"):
        closed = algorithms.diag_truncation_error(prob.sigma, n, delta, prob.p, prob.tail)
        l2 = algorithms.diag_l2noise_error(prob.sigma, n, delta, prob.tail)
        est = ""
        if o.raw("budget") is not None or prob.dim <= 4:
            pol = algorithms.build_diag_truncation_policy(prob, n)
            rep = harness.estimate_worst_error(pol, prob, delta, budget=o.int("budget", 16),
                                               seed=o.int("seed", 0))
            est = rep.estimated
            if est > closed + 1e-9:
                status = EXIT_VERIFY
        rows.append((n, delta, prob.p, closed, l2, est))
    _emit(rows, ("n", "delta", "p", "truncation_error", "l2noise_error", "error_est"), o.raw("out"))
    return status


def cmd_entropy(o: Opts) -> int:
    prob = o.problem()
    rows = []
    status = EXIT_OK
    for n in o.ints("n", "0:3"):
        try:
            est = entropy.sandwich(prob, n, seed=o.int("seed", 0))
        except InconsistencyReport as exc:
            print(f"inconsistent: {exc}", file=sys.stderr)
            status = EXIT_VERIFY
            continue
        lo, hi = est.band if est.band is not None else (math.nan, math.nan)
        rows.append((n, est.lower, est.upper, est.formula_value, lo, hi))
    _emit(rows, ("n", "lower", "upper", "formula", "band_lo", "band_hi"), o.raw("out"))
    return status


def cmd_floor(o: Opts) -> int:
    prob = o.problem()
    delta = o.float("delta", 0.25)
    certs = [bounds.linear_floor(prob, delta)]
    if o.raw("L") is not None:
        certs.append(bounds.lipschitz_floor(prob, o.float("L"), delta))
    rows = [row for c in certs for row in c.rows()]
    _emit(rows, ("kind", "bound", "witness", "f", "ys"), o.raw("out"))
    return EXIT_OK if all(c.verified for c in certs) else EXIT_VERIFY


def cmd_sweep(o: Opts) -> int:
    keys = set(harness.ExperimentConfig.__dataclass_fields__)
    cfg = harness.ExperimentConfig.from_mapping({k: v for k, v in o.values.items()
                                                 if k in keys and v is not None})
    text = harness.sweep(cfg)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(o: Opts) -> int:
    prob = o.problem()
    n = o.raw("n")
    rows = harness.compare_settings(prob, o.float("delta", 0.0), o.float("eps", 0.1),
                                    None if n is None else int(n))
    text = harness.compare_csv(rows)
    if o.raw("out"):
        Path(o.raw("out")).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "encode": (cmd_encode, "quantized cell encoder on the l_inf cube"),
    "bisect": (cmd_bisect, "bisection over a grid ball cover"),
    "refine": (cmd_refine, "coordinate refinement policy"),
    "diag": (cmd_diag, "diagonal operator errors, or an allocation plan with --eps"),
    "entropy": (cmd_entropy, "entropy-number bracket and closed form"),
    "floor": (cmd_floor, "lower-bound certificates"),
    "sweep": (cmd_sweep, "parameter sweep to CSV"),
    "compare": (cmd_compare, "compare information classes"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int)
    common.add_argument("--n", help="integer, list a,b,c or range lo:hi")
    common.add_argument("--delta")
    common.add_argument("--p")
    common.add_argument("--q")
    common.add_argument("--sigma", help="file with one value per line, or power:s")
    common.add_argument("--sigma-length", dest="sigma_length", type=int)
    common.add_argument("--eps")
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--out")
    common.add_argument("--config", help="file of key=value lines")
    common.add_argument("--L", dest="L", help="Lipschitz constant (floor)")
    common.add_argument("--kind", help="sweep kind: " + ", ".join(harness.SWEEP_KINDS))
    common.add_argument("--level", type=int)
    common.add_argument("--transcripts", help="write sample session transcripts as CSV")
    parser = _Parser(prog="noisyinfo", description="Noisy adaptive information laboratory.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage problems (and --help) this way
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if ns.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        config = read_config(ns.config) if ns.config else {}
        del ns.config
        func = COMMANDS[ns.command][0]
        del ns.command
        return func(Opts(ns, config))
    except (UsageError, NoisyInfoError, ValueError, OSError) as exc:
        print(f"noisyinfo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
