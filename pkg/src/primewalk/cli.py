"""Command-line front end.

Every subcommand writes CSV (or JSON with ``--json``) to ``--out`` or
stdout. With ``--out PATH`` a run manifest is written next to it as
``PATH.manifest.json``; on stdout the manifest goes to stderr as one JSON
line. Exit codes: 0 success, 2 tolerance not met, 3 invalid input,
4 resource or horizon limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import PUBLISHED, fit_constants, heuristic, leading_order
from .die import parse_die
from .errors import InvalidParameterError, PrimewalkError, ToleranceNotMetError
from .exactdist import default_tail_eps, lk_distributions, moments, scaled_pdf
from .hitprob import convergence_envelope, hit_probabilities, spectral
from .montecarlo import GENERATOR_NAME, SimConfig, deviation_frequencies, simulate_lk
from .targets import ensure, parse_targets

TABLE_HEADER = ["k", "mean", "std", "skewness", "kurtosis", "tail_mass", "n_max"]
PMF_HEADER = ["n", "probability"]
PDF_HEADER = ["z", "density"]
HIST_HEADER = ["n", "count"]
ROOTS_HEADER = ["re", "im", "modulus", "residual"]
HITS_HEADER = ["x", "p", "deviation"]
CONCENTRATION_HEADER = ["a", "frequency"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _rows_json(header, rows) -> str:
    return json.dumps([dict(zip(header, row)) for row in rows], indent=2) + "\n"


def _progress(n, active):
    print(f"roll {n}: unabsorbed mass {active:.3e}", file=sys.stderr, flush=True)


def _manifest(args, **extra) -> dict:
    m = {
        "subcommand": args.command,
        "tool_version": __version__,
    }
    for key in ("die", "targets", "k", "k_max", "tail_eps", "horizon", "seed", "trials"):
        if getattr(args, key, None) is not None:
            m[key] = getattr(args, key)
    m.update(extra)
    return m


def _emit(args, text: str, manifest: dict, started: float) -> None:
    manifest["wall_clock_seconds"] = round(time.perf_counter() - started, 3)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    else:
        sys.stdout.write(text)
        print(json.dumps(manifest), file=sys.stderr)


def _setup(args):
    die = parse_die(args.die)
    ts = parse_targets(args.targets)
    return die, ts


def cmd_table(args):
    if args.k_max < 1:
        raise InvalidParameterError("--k-max must be at least 1")
    die, ts = _setup(args)
    progress = _progress if args.k_max > 30 and not args.quiet else None
    dists = lk_distributions(
        die, ts, range(1, args.k_max + 1), tail_eps=args.tail_eps, horizon=args.horizon,
        progress=progress,
    )
    rows = []
    for k in range(1, args.k_max + 1):
        d = dists[k]
        m = moments(d)
        rows.append((k, m.mean, m.std, m.skewness, m.kurtosis, d.tail_mass, d.n_max))
    text = _rows_json(TABLE_HEADER, rows) if args.json else _csv(TABLE_HEADER, rows)
    tail_eps = None if args.horizon is not None else (args.tail_eps or default_tail_eps(args.k_max))
    return text, _manifest(args, effective_tail_eps=tail_eps)


def _single(args):
    die, ts = _setup(args)
    progress = _progress if args.k > 30 and not args.quiet else None
    return lk_distributions(
        die, ts, [args.k], tail_eps=args.tail_eps, horizon=args.horizon, progress=progress
    )[args.k]


def cmd_pmf(args):
    d = _single(args)
    rows = [(n, p) for n, p in enumerate(d.pmf) if n >= d.n_min]
    text = _rows_json(PMF_HEADER, rows) if args.json else _csv(PMF_HEADER, rows)
    return text, _manifest(args, tail_mass=d.tail_mass, n_max=d.n_max)


def cmd_pdf(args):
    d = _single(args)
    m = moments(d)
    z, dens = scaled_pdf(d)
    rows = list(zip(z, dens))
    text = _rows_json(PDF_HEADER, rows) if args.json else _csv(PDF_HEADER, rows)
    summary = {
        "mean": m.mean, "std": m.std, "skewness": m.skewness, "kurtosis": m.kurtosis,
        "tail_mass": d.tail_mass, "n_max": d.n_max,
    }
    return text, _manifest(args, summary=summary)


def cmd_simulate(args):
    die, ts = _setup(args)
    cfg = SimConfig(args.seed, args.trials, die, ts, args.k)
    stats = simulate_lk(cfg, workers=args.workers)
    rows = sorted(stats.histogram.items())
    summary = {
        "count": stats.count, "mean": stats.mean, "std": stats.std,
        "skewness": stats.skewness, "kurtosis": stats.kurtosis,
        "standard_error_of_mean": stats.standard_error_of_mean,
    }
    if args.json:
        text = json.dumps({"summary": summary, "histogram": [dict(n=n, count=c) for n, c in rows]},
                          indent=2) + "\n"
    else:
        text = _csv(HIST_HEADER, rows)
    return text, _manifest(args, generator=GENERATOR_NAME, summary=summary)


def cmd_roots(args):
    die = parse_die(args.die)
    spec = spectral(die)
    rows = [(z.real, z.imag, abs(z), res) for z, res in zip(spec.roots, spec.residuals)]
    text = _rows_json(ROOTS_HEADER, rows) if args.json else _csv(ROOTS_HEADER, rows)
    series = hit_probabilities(die, args.horizon_x)
    c_est, verified = convergence_envelope(series, spec)
    manifest = _manifest(
        args,
        subdominant_max_modulus=spec.subdominant_max_modulus,
        mu=spec.mu,
        dominant_root_residual=spec.dominant_root_residual,
        convergence_constant_estimate=c_est,
        envelope_verified=verified,
    )
    if not verified:
        _emit(args, text, manifest, args._started)
        raise ToleranceNotMetError("convergence envelope could not be verified")
    return text, manifest


def cmd_hits(args):
    die = parse_die(args.die)
    s = hit_probabilities(die, args.n)
    rows = [(x, s.values[x], s.deviation[x]) for x in range(s.n + 1)]
    text = _rows_json(HITS_HEADER, rows) if args.json else _csv(HITS_HEADER, rows)
    return text, _manifest(args, limit=s.limit, n=args.n)


def _read_pairs(path):
    pairs = []
    try:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                pairs.append((int(row["k"]), float(row["mean"])))
    except (OSError, KeyError, ValueError) as exc:
        raise InvalidParameterError(f"cannot read (k, mean) pairs from {path!r}: {exc}") from exc
    return pairs


def cmd_fit(args):
    pairs = [(k, m) for k, m in _read_pairs(args.input) if k >= 2]
    if args.ks:
        wanted = set(args.ks)
        pairs = [(k, m) for k, m in pairs if k in wanted]
    fit = fit_constants(pairs)
    out = fit.to_dict()
    out["published"] = {
        "c1": PUBLISHED.c1,
        "c2": PUBLISHED.c2,
        "ratios": [{"k": k, "ratio": m / heuristic(k, PUBLISHED)} for k, m in pairs],
    }
    out["leading_order_ratios"] = [{"k": k, "ratio": m / leading_order(k)} for k, m in pairs]
    return json.dumps(out, indent=2) + "\n", _manifest(args, input=str(args.input))


def cmd_verify_concentration(args):
    die, ts = _setup(args)
    n = args.n_targets
    while ts.nth_member(n) is None:
        if ts.kind != "primes":
            raise InvalidParameterError(f"the target list has fewer than {n} members")
        ts = ensure(ts, ts.limit * 2)
    scale = math.sqrt(n * math.log(n))
    a_values = [m * scale for m in args.multipliers]
    freqs = deviation_frequencies(die, ts, n, a_values, args.trials, args.seed)
    rows = list(zip(a_values, freqs))
    text = _rows_json(CONCENTRATION_HEADER, rows) if args.json else _csv(CONCENTRATION_HEADER, rows)
    monotone = all(b <= a for a, b in zip(freqs, freqs[1:]))
    manifest = _manifest(args, generator=GENERATOR_NAME, n_targets=n, monotone=monotone)
    if not monotone:
        _emit(args, text, manifest, args._started)
        raise ToleranceNotMetError("deviation frequencies are not monotone in a")
    return text, manifest


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="primewalk",
        description="Exact distribution and simulation of dice-walk hitting times on target sets.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, targets=True):
        sp.add_argument("--die", default="fair:6", help="fair:R or file:PATH (default fair:6)")
        if targets:
            sp.add_argument("--targets", default="primes", help="primes or file:PATH")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--json", action="store_true", help="emit JSON instead of CSV")

    def exact(sp):
        sp.add_argument("--tail-eps", type=float, default=None)
        sp.add_argument("--horizon", type=int, default=None,
                        help="stop after exactly this many rolls and renormalize")
        sp.add_argument("--quiet", action="store_true", help="no progress on stderr")

    sp = sub.add_parser("table", help="moments of L_k for k = 1..k_max")
    common(sp)
    exact(sp)
    sp.add_argument("--k-max", type=int, required=True)
    sp.set_defaults(func=cmd_table)

    for name, func, helptext in (
        ("pmf", cmd_pmf, "probability mass function of L_k"),
        ("pdf", cmd_pdf, "standardized density of L_k"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        exact(sp)
        sp.add_argument("--k", type=int, required=True)
        sp.set_defaults(func=func)

    sp = sub.add_parser("simulate", help="Monte Carlo histogram of L_k")
    common(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("roots", help="roots of the hit-probability characteristic polynomial")
    common(sp, targets=False)
    sp.add_argument("--horizon-x", type=int, default=200,
                    help="series length used for the envelope check")
    sp.set_defaults(func=cmd_roots)

    sp = sub.add_parser("hits", help="hit probabilities p(0..n)")
    common(sp, targets=False)
    sp.add_argument("--n", type=int, default=100)
    sp.set_defaults(func=cmd_hits)

    sp = sub.add_parser("fit", help="fit c1, c2 of k(ln k + ln ln k + c1) + c2")
    sp.add_argument("input", help="CSV with k and mean columns (e.g. table output)")
    sp.add_argument("--ks", type=int, nargs="*", help="restrict to these k values")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fit, json=True)

    sp = sub.add_parser("verify-concentration", help="deviation frequencies of target hit counts")
    common(sp)
    sp.add_argument("--n-targets", type=int, default=500)
    sp.add_argument("--multipliers", type=float, nargs="+", default=[1.0, 2.0, 3.0],
                    help="a = multiplier * sqrt(n ln n)")
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify_concentration)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._started = time.perf_counter()
    try:
        text, manifest = args.func(args)
        _emit(args, text, manifest, args._started)
    except PrimewalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
