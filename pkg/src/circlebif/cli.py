"""Command-line interface: family specs in, JSON/CSV/SVG out.

Exit status is 0 on success, 2 for invalid input or a family that fails
validation, 3 for numerical non-convergence and 1 for any other library
error.  Diagnostics go to stderr as a single line.
"""
from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from . import _io
from ._config import set_threads
from .errors import CircleBifError, NumericalError, ValidationError
from .family import FamilySpec, Lemma1Params, build_lemma1_family, embed_theta, parse_rational


def _rational(text) -> Fraction:
    try:
        r = parse_rational(text)
        num, den = (int(v) for v in text.split("/"))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational p/q: {text!r}") from exc
    if den < 1 or (r.numerator, r.denominator) != (num, den):
        raise argparse.ArgumentTypeError(f"rational must be reduced with q >= 1: {text!r}")
    return r


def _rational_list(text):
    return [_rational(t) for t in text.split(",") if t.strip()]


def _triple(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected s,theta,x")
    return tuple(parts)


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _load(path) -> FamilySpec:
    return FamilySpec.load(path)


def _emit(data, args):
    if getattr(args, "out", None):
        _io.write_json(data, args.out)
    else:
        sys.stdout.write(_io.dumps(data))


# ---------------------------------------------------------------- commands

def cmd_rotnum(args):
    from .rotation import estimate_rho
    est = estimate_rho(_load(args.family), (args.s, args.theta), args.iters, args.x0, args.qmax)
    _emit(est.to_json(), args)


def cmd_detect(args):
    from .rotation import detect_rational
    r = detect_rational(_load(args.family), (args.s, args.theta), args.qmax, args.tol, args.iters)
    _emit({"s": args.s, "theta": args.theta, "rational": None if r is None else f"{r.numerator}/{r.denominator}"},
          args)


def cmd_census(args):
    from .census import run_census
    c = run_census(_load(args.family), (args.s, args.theta), args.rational, args.grid)
    _emit(c.to_json(), args)


def cmd_tongue(args):
    from .rotation import tongue_interval
    _emit(tongue_interval(_load(args.family), args.rational, args.tol, args.s).to_json(), args)


def cmd_trace(args):
    from .bifurcation import StepControl, solve_saddle_node, trace_curve
    spec = _load(args.family)
    sn = solve_saddle_node(spec, args.rational, args.seed, args.frozen)
    curve = trace_curve(spec, args.rational, sn, StepControl(args.min_step, args.max_step))
    _emit(curve.to_json(), args)
    if args.csv:
        _io.write_csv(curve.csv_rows(), args.csv)


def cmd_diagram(args):
    from .bifurcation import assemble_diagram
    spec = _load(args.family)
    diagrams = assemble_diagram(spec, args.rationals, args.scan_grid)
    _emit({"diagrams": [d.to_json() for d in diagrams.values()]}, args)
    if args.svg:
        for n, d in enumerate(diagrams.values()):
            path = args.svg if n == 0 else f"{os.path.splitext(args.svg)[0]}_{n}.svg"
            with open(path, "w") as fh:
                fh.write(_io.diagram_svg(d, spec.param_box))
    if args.csv_dir:
        os.makedirs(args.csv_dir, exist_ok=True)
        for n, d in enumerate(diagrams.values()):
            for k, c in enumerate(d.curves):
                _io.write_csv(c.csv_rows(), os.path.join(args.csv_dir, f"diagram{n}_curve{k}.csv"))


def cmd_cusps(args):
    from .bifurcation import assemble_diagram, find_cusps
    spec = _load(args.family)
    if args.seed:
        cusps = find_cusps(spec, args.rational, args.seed)
    else:
        cusps = assemble_diagram(spec, [args.rational], args.scan_grid)[args.rational].cusps
    _emit({"pq": f"{args.rational.numerator}/{args.rational.denominator}",
           "cusps": [c.to_json() for c in cusps]}, args)


def cmd_invariants(args):
    from .errors import RationalNotAttained
    from .invariants import max_sources_at_rational
    spec = _load(args.family)
    recs = []
    for pq in args.rationals:
        try:
            recs.append(max_sources_at_rational(spec, pq, args.theta_samples, args.s).to_json())
        except RationalNotAttained:
            recs.append({"pq": f"{pq.numerator}/{pq.denominator}", "attained": False})
    _emit({"records": recs}, args)


def cmd_parity_diff(args):
    from .invariants import parity_prefix_diff
    d = parity_prefix_diff(_load(args.family_a), _load(args.family_b), args.rationals, args.theta_samples)
    _emit(d.to_json(), args)


def cmd_scan_section(args):
    from .invariants import section_scan
    sc = section_scan(_load(args.family), args.rational, args.s_steps, args.theta_samples)
    _emit(sc.to_json(), args)
    if args.csv:
        _io.write_csv(sc.csv_rows(), args.csv)


def cmd_construct_lemma1(args):
    pq = args.pq
    spec = build_lemma1_family(Lemma1Params(pq.numerator, pq.denominator, args.n, args.delta, args.amp))
    if args.embed_theta:
        spec = embed_theta(spec)
    _emit(spec.to_json(), args)


def cmd_validate(args):
    from .family import validate_diffeo
    rep = validate_diffeo(_load(args.family), args.grid_x, args.grid_params)
    _emit(rep.to_json(), args)
    if not rep.ok:
        raise ValidationError(f"not a diffeomorphism: d/dx = {rep.min_derivative:.6g} at {rep.at}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="circlebif", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None,
                   help="numba worker threads (default: CIRCLEBIF_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, family=True, point=False, out=True):
        sp = sub.add_parser(name)
        if family:
            sp.add_argument("--family", required=True, help="family spec JSON")
        if point:
            sp.add_argument("--s", type=float, default=0.0)
            sp.add_argument("--theta", type=float, default=0.0)
        if out:
            sp.add_argument("--out", help="output JSON (default: stdout)")
        sp.set_defaults(func=fn)
        return sp

    sp = add("rotnum", cmd_rotnum, point=True)
    sp.add_argument("--iters", type=int, default=100_000)
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--qmax", type=int, default=64)

    sp = add("detect", cmd_detect, point=True)
    sp.add_argument("--qmax", type=int, default=64)
    sp.add_argument("--tol", type=_positive, default=1e-10)
    sp.add_argument("--iters", type=int, default=20_000)

    sp = add("census", cmd_census, point=True)
    sp.add_argument("--rational", type=_rational, required=True)
    sp.add_argument("--grid", type=int, default=None, help="grid points (default 4096 q)")

    sp = add("tongue", cmd_tongue)
    sp.add_argument("--rational", type=_rational, required=True)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--tol", type=_positive, default=1e-9)

    sp = add("trace", cmd_trace)
    sp.add_argument("--rational", type=_rational, required=True)
    sp.add_argument("--seed", type=_triple, required=True, help="s,theta,x")
    sp.add_argument("--frozen", choices=("s", "theta"), default="s")
    sp.add_argument("--min-step", type=_positive, default=1e-6)
    sp.add_argument("--max-step", type=_positive, default=1e-2)
    sp.add_argument("--csv")

    sp = add("diagram", cmd_diagram)
    sp.add_argument("--rationals", type=_rational_list, required=True, help="comma-separated p/q list")
    sp.add_argument("--scan-grid", type=int, default=32)
    sp.add_argument("--svg")
    sp.add_argument("--csv-dir")

    sp = add("cusps", cmd_cusps)
    sp.add_argument("--rational", type=_rational, required=True)
    sp.add_argument("--seed", type=_triple, action="append", default=[], help="s,theta,x (repeatable)")
    sp.add_argument("--scan-grid", type=int, default=32)

    sp = add("invariants", cmd_invariants)
    sp.add_argument("--rationals", type=_rational_list, required=True)
    sp.add_argument("--theta-samples", type=int, default=256)
    sp.add_argument("--s", type=float, default=None)

    sp = add("parity-diff", cmd_parity_diff, family=False)
    sp.add_argument("--family-a", required=True)
    sp.add_argument("--family-b", required=True)
    sp.add_argument("--rationals", type=_rational_list, required=True)
    sp.add_argument("--theta-samples", type=int, default=64)

    sp = add("scan-section", cmd_scan_section)
    sp.add_argument("--rational", type=_rational, required=True)
    sp.add_argument("--s-steps", type=int, default=200)
    sp.add_argument("--theta-samples", type=int, default=64)
    sp.add_argument("--csv")

    sp = add("construct-lemma1", cmd_construct_lemma1, family=False)
    sp.add_argument("--pq", type=_rational, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--amp", type=float, default=1.0)
    sp.add_argument("--embed-theta", action="store_true", help="emit the theta-family x -> theta + lift(x)")

    sp = add("validate", cmd_validate)
    sp.add_argument("--grid-x", type=int, default=256)
    sp.add_argument("--grid-params", type=int, default=16)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        set_threads(args.threads)
        args.func(args)
    except ValidationError as exc:
        print(f"circlebif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except NumericalError as exc:
        print(f"circlebif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except CircleBifError as exc:
        print(f"circlebif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError) as exc:
        print(f"circlebif: invalid input: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
