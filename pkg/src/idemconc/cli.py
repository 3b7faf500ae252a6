"""Command-line entry point: ``idemconc <subcommand> ...``.

Every subcommand prints a human-readable result by default and a JSON
document with ``--json``.  JSON documents carry a ``manifest`` with the
subcommand, the full parameter echo, the tool version, the tolerances and a
sha256 checksum of the payload.  Floats are written with 12 significant
digits, so identical invocations give byte-identical output.  Wall time is
printed to stderr (and embedded only with ``--timing``).

Exit codes: 0 success, 2 argument or domain error, 3 numerical failure,
1 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from fractions import Fraction
from importlib import metadata

from . import constants, construct, kernel, quadrature, search
from .errors import DomainError, NumericalFailure

THREADS_ENV = "IDEMCONC_THREADS"
FLOAT_DIGITS = 12
JSON_FREQ_LIMIT = 1_000_000


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


# ---------------------------------------------------------------- formatting


def _round_floats(obj):
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return None
        return float(f"{obj:.{FLOAT_DIGITS}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ": "), indent=2)


def emit_json(subcommand: str, params: dict, tolerances: dict, payload: dict, wall: float | None) -> str:
    payload = _round_floats(payload)
    checksum = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    manifest = {
        "subcommand": subcommand,
        "params": _round_floats(params),
        "version": tool_version(),
        "tolerances": _round_floats(tolerances),
        "checksum": checksum,
    }
    doc = dict(payload)
    if wall is not None:
        doc["wall_seconds"] = round(wall, 3)
        manifest["wall_seconds"] = round(wall, 3)
    doc["manifest"] = manifest
    return _dumps(doc)


def _fmt(x: float) -> str:
    return f"{x:.{FLOAT_DIGITS}g}"


# ---------------------------------------------------------------- parsing helpers


def parse_rational(text: str) -> Fraction:
    """``"1/6"``, ``"0.25"`` or ``"3"`` as an exact fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def parse_xi(text: str) -> float:
    if text in construct.XI_PRESETS:
        return construct.XI_PRESETS[text]
    try:
        return float(parse_rational(text))
    except argparse.ArgumentTypeError:
        presets = ", ".join(sorted(construct.XI_PRESETS))
        raise argparse.ArgumentTypeError(f"xi must be a number or one of: {presets}") from None


def _read_freqs(args) -> kernel.FrequencySet:
    if args.freqs_file:
        with open(args.freqs_file, encoding="utf-8") as fh:
            return kernel.parse_frequency_text(fh.read())
    if args.freqs is None:
        raise DomainError("give --freqs or --freqs-file")
    return kernel.parse_frequency_list(args.freqs)


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _params(args) -> dict:
    skip = {"func", "json", "timing"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = str(v) if isinstance(v, Fraction) else v
    return out


# ---------------------------------------------------------------- subcommands


def cmd_constants(args):
    which = args.which
    p = args.p
    tol = {"golden_xtol": constants.OMEGA_XTOL}
    if which == "gamma2":
        payload = {"value": constants.gamma2(), "argmax_x": constants.gamma2_argmax(), "formula": "gamma2"}
    elif which == "delta":
        tol["delta_tol"] = args.tol
        payload = {"value": constants.delta_p(p, args.tol), "p": p, "formula": "delta_p"}
    elif which == "cp":
        payload = constants.c_p_lower(p).to_dict()
    elif which == "cpstar":
        payload = constants.c_p_star(p, args.tol).to_dict()
    elif which == "giratio":
        if args.omega is None:
            payload = constants.giratio_sup(p).to_dict()
        else:
            payload = {"value": constants.giratio_bound(args.omega, p), "argmax_omega": args.omega,
                       "p": p, "formula": "giratio1"}
    else:
        payload = constants.theorem1_lower(p).to_dict()
    text = _fmt(payload["value"])
    return payload, tol, text


def cmd_dirichlet(args):
    xs = [float(parse_rational(v)) for v in args.x.split(",") if v.strip()]
    if args.n < 1:
        raise DomainError("n must be positive")
    vals = [float(kernel.dirichlet_magnitude(args.n, x)) for x in xs]
    payload = {"n": args.n, "points": [{"x": x, "magnitude": v} for x, v in zip(xs, vals)]}
    text = "\n".join(f"{_fmt(x)}\t{_fmt(v)}" for x, v in zip(xs, vals))
    return payload, {}, text


def cmd_ratio(args):
    s = _read_freqs(args)
    e = quadrature.IntervalUnion.parse(args.set)
    res = quadrature.concentration_ratio(s, e, args.p, args.tol)
    payload = dict(res.to_dict(), freqs=list(s.as_tuple()), set=str(e), measure=e.measure)
    return payload, {"tol": args.tol}, _fmt(res.ratio)


def _construction_payload(freqs, extra: dict) -> dict:
    payload = dict(extra, size=len(freqs), min_freq=freqs.min_freq, max_freq=freqs.max_freq)
    payload["freqs"] = list(freqs.materialize().as_tuple()) if len(freqs) <= JSON_FREQ_LIMIT else None
    return payload


def cmd_construct(args):
    mode = args.mode
    p_bound = args.p
    if mode == "simple":
        if args.q is None:
            raise DomainError("--q is required")
        q = args.q
        if args.w is not None:
            w = args.w
        elif args.omega is not None:
            w = construct.simple_block_length(q, args.omega)
        else:
            raise DomainError("give --w or --omega")
        m = q if args.m is None else args.m
        freqs = construct.build_simple(q, m, w)
        omega = w / q
        extra = {"mode": mode, "q": q, "m": m, "w": w, "omega": omega}
        if 0 < omega < 0.5 and p_bound > 1:
            extra["predicted_bound"] = constants.giratio_bound(omega, p_bound)
    elif mode == "general":
        if args.q is None or args.k is None or args.omega is None:
            raise DomainError("--q, --k and --omega are required")
        built = construct.construct_general(args.q, args.k, args.omega, args.m, args.Q)
        freqs = built.freqs
        extra = {"mode": built.mode, "omega": built.omega,
                 "recipe": built.recipe.to_dict() if built.recipe else None,
                 "predicted_bound": built.predicted_bound(p_bound)}
    elif mode == "special":
        if args.k is None or args.l is None or args.m is None:
            raise DomainError("--k, --l and --m are required")
        freqs = construct.build_special(args.k, args.l, args.m)
        extra = {"mode": mode, "k": args.k, "l": args.l, "m": args.m}
    else:
        if args.xi is None or args.omega is None or args.n is None:
            raise DomainError("--xi, --omega and --n are required")
        recipe = construct.WeylRecipe(args.xi, args.omega, args.n, args.theta)
        freqs = construct.build_weyl(recipe)
        extra = {"mode": mode, "xi": args.xi, "omega": args.omega, "n": args.n, "theta": args.theta}
        if len(freqs) == 0:
            payload = dict(extra, size=0, min_freq=None, max_freq=None, freqs=[])
            return payload, {}, ""
    payload = _construction_payload(freqs, extra)
    text = freqs.to_text().rstrip("\n")
    return payload, {}, text


def cmd_approx(args):
    pairs = construct.rational_approx(args.xi, args.qmax)
    payload = {"xi": args.xi, "qmax": args.qmax, "pairs": [{"k": k, "q": q} for k, q in pairs]}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "q"])
    w.writerows(pairs)
    return payload, {}, buf.getvalue().rstrip("\n")


def _parse_chunk(text):
    if text is None:
        return None
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise DomainError(f"chunk must look like START:STOP, got {text!r}") from None


def _progress(enabled):
    if not enabled:
        return None

    def report(done, total):
        print(f"progress {done}/{total}", file=sys.stderr, flush=True)

    return report


def cmd_search(args):
    config = search.SearchConfig(
        q=args.q, n=args.n, m=args.m, p=args.p, tol=args.tol,
        canonical_only=not args.all_subsets, chunk=_parse_chunk(args.chunk),
    )
    threads = args.threads or _default_threads()
    report = search.run_search(config, threads=threads, checkpoint=args.checkpoint,
                               resume=args.resume, progress=_progress(args.progress))
    payload = report.to_dict()
    b = report.best
    text = (
        f"best {' '.join(map(str, b.freqs))} ratio {_fmt(b.ratio)} special {b.special}\n"
        f"best special {' '.join(map(str, report.best_special.freqs))} "
        f"ratio {_fmt(report.best_special.ratio)}\n"
        f"c {_fmt(report.c_estimate)} evaluated {report.candidates_evaluated}"
    )
    return payload, {"tol": config.tol}, text


def resolve_m(rule: str, q: int) -> int:
    rule = rule.strip()
    if rule == "q2+1":
        return q * q + 1
    if rule == "q":
        return q
    try:
        m = int(rule)
    except ValueError:
        raise DomainError(f"m rule must be 'q2+1', 'q' or an integer, got {rule!r}") from None
    if m < 1:
        raise DomainError("m must be positive")
    return m


def table1(q_list, n_max: int, m_rule: str = "q2+1", p: float = 1.0, tol: float = 1e-7,
           threads: int = 1, n_min: int = 3, progress=None) -> list[dict]:
    """One row per ``q``: the minimum ``c`` over ``n_min <= n <= n_max`` and where it occurs."""
    if n_max < n_min:
        raise DomainError(f"n_max must be at least {n_min}")
    rows = []
    for q in q_list:
        m = resolve_m(m_rule, q)
        per_n = []
        for n in range(n_min, n_max + 1):
            rep = search.run_search(search.SearchConfig(q=q, n=n, m=m, p=p, tol=tol), threads=threads)
            per_n.append({"n": n, "c": rep.c_estimate, "best": list(rep.best.freqs),
                          "best_ratio": rep.best.ratio, "best_special": list(rep.best_special.freqs),
                          "best_special_ratio": rep.best_special.ratio})
            if progress:
                progress(q, n)
        low = min(per_n, key=lambda r: (r["c"], r["n"]))
        rows.append({
            "q": q, "m": m, "c": low["c"], "n_range": f"{n_min}-{n_max}", "argmin_n": low["n"],
            "best_set": per_n[-1]["best"], "per_n": per_n,
        })
    return rows


def cmd_table1(args):
    qs = [int(v) for v in args.q.split(",") if v.strip()]
    if not qs or any(q < 2 for q in qs):
        raise DomainError("every q must be at least 2")
    threads = args.threads or _default_threads()
    prog = None
    if args.progress:
        def prog(q, n):
            print(f"q={q} n={n} done", file=sys.stderr, flush=True)
    rows = table1(qs, args.n_max, args.m_rule, args.p, args.tol, threads, progress=prog)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "c", "n_range", "argmin_n", "best_set"])
    for r in rows:
        w.writerow([r["q"], _fmt(r["c"]), r["n_range"], r["argmin_n"], " ".join(map(str, r["best_set"]))])
    return {"rows": rows}, {"tol": args.tol}, buf.getvalue().rstrip("\n")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idemconc", description="L^p concentration of idempotent trigonometric polynomials.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="emit a JSON document with a manifest")
        sp.add_argument("--timing", action="store_true", help="embed wall time in the JSON output")

    sp = sub.add_parser("constants", help="gamma2, delta_p, c_p, c_p*, theorem-1 bound")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--which", choices=["gamma2", "delta", "cp", "cpstar", "theorem1", "giratio"], default="theorem1")
    sp.add_argument("--omega", type=float, default=None, help="evaluate giratio at this omega instead of maximizing")
    sp.add_argument("--tol", type=float, default=constants.DELTA_TOL)
    common(sp)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("dirichlet", help="|D_n(x)| at one or more points")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--x", required=True, help="comma-separated points, rationals allowed")
    common(sp)
    sp.set_defaults(func=cmd_dirichlet)

    sp = sub.add_parser("ratio", help="concentration ratio of a frequency set on an interval union")
    sp.add_argument("--freqs", help="comma-separated frequencies, e.g. 0,1,3")
    sp.add_argument("--freqs-file", help="file with one frequency per line")
    sp.add_argument("--set", required=True, help="'a:b[,a:b...]' or 'c=1/6;h=1/222'")
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=quadrature.DEFAULT_TOL)
    common(sp)
    sp.set_defaults(func=cmd_ratio)

    sp = sub.add_parser("construct", help="build a concentrated idempotent")
    sp.add_argument("--mode", choices=["simple", "general", "special", "weyl"], required=True)
    sp.add_argument("--q", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--l", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--Q", type=int, default=1)
    sp.add_argument("--w", type=int, help="block length for --mode simple")
    sp.add_argument("--omega", type=float)
    sp.add_argument("--xi", type=parse_xi)
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--n", type=int, help="N for --mode weyl")
    sp.add_argument("--p", type=float, default=2.0, help="exponent for the predicted bound")
    common(sp)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("approx", help="prime-denominator approximations |xi - k/q| < 1/q^2 (CSV)")
    sp.add_argument("--xi", type=parse_xi, required=True)
    sp.add_argument("--qmax", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("search", help="exhaustive search over subsets of {0..n-1}")
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, default=None, help="default q^2+1")
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--threads", type=int, default=None, help=f"worker processes (default ${THREADS_ENV} or 1)")
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--resume", action="store_true")
    sp.add_argument("--chunk", default=None, help="START:STOP index range")
    sp.add_argument("--all-subsets", action="store_true", help="do not fix 0 in the set")
    sp.add_argument("--progress", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("table1", help="sweep of the constant c over q and n (CSV)")
    sp.add_argument("--q", required=True, help="comma-separated list of q")
    sp.add_argument("--n-max", type=int, required=True)
    sp.add_argument("--m-rule", default="q2+1", help="'q2+1', 'q' or a fixed integer")
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--progress", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_table1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        payload, tolerances, text = args.func(args)
    except (DomainError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - start
    if args.json:
        out = emit_json(args.command, _params(args), tolerances, payload, wall if args.timing else None)
    else:
        out = text
    if out:
        sys.stdout.write(out + "\n")
    print(f"wall time {wall:.3f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
