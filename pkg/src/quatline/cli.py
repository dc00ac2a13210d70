"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a verification fails, 2 for
usage errors, malformed input, non-finite numbers and domain violations.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import diff_lab, map_zoo, verifier
from .errors import QuatlineError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")] if text.strip() else []
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None
    if n is not None and len(vals) == 1 and vals[0] == 0:
        vals = [0.0] * n
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} numbers, got {len(vals)} in {text!r}")
    if not all(math.isfinite(v) for v in vals):
        raise UsageError(f"non-finite number in {text!r}")
    return vals


def _number(text: str) -> float:
    return _floats(text, 1)[0]


def _load_map(args):
    if args.map and args.map_file:
        raise UsageError("give either --map or --map-file, not both")
    if args.map_file:
        try:
            with open(args.map_file) as fh:
                text = fh.read()
        except OSError as e:
            raise UsageError(f"cannot read map file: {e}") from None
    elif args.map:
        text = args.map
    else:
        raise UsageError("a map spec is required (--map or --map-file)")
    try:
        spec = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise UsageError(f"malformed map JSON: {e}") from None
    try:
        return map_zoo.map_from_json(spec)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"invalid map spec: {e}") from None


def _reject_constant(name):
    raise UsageError(f"non-finite number {name} in map JSON")


def _check_common(args):
    if getattr(args, "radius", 1.0) <= 0:
        raise UsageError("--radius must be positive")
    if getattr(args, "samples", 7) < 7:
        raise UsageError("--samples must be at least 7")
    for name in ("segments", "points"):
        if getattr(args, name, 1) < 1:
            raise UsageError(f"--{name} must be at least 1")


# -- output -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _emit(args, payload, csv_table=None):
    if args.format == "csv":
        if csv_table is None:
            raise UsageError(f"--format csv is not available for {args.command}")
        text = _csv(*csv_table)
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as e:
            raise UsageError(f"cannot write output: {e}") from None
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------

def _tolerances(args) -> verifier.Tolerances:
    tol = verifier.Tolerances()
    if args.tol_circle is not None:
        tol.circle = args.tol_circle
    if args.tol_residual is not None:
        tol.eq2 = tol.eq6pp = args.tol_residual
    return tol


def cmd_verify(args) -> int:
    f = _load_map(args)
    rep = verifier.verify_map(
        f,
        center=_floats(args.center, 4),
        radius=args.radius,
        n_segments=args.segments,
        n_samples=args.samples,
        n_points=args.points,
        seed=args.seed,
        tol=_tolerances(args),
    )
    header = ["segment", "kind", "residual", "pass"]
    rows = [[s["segment"], s["kind"], s["residual"], s["pass"]] for s in rep.segments]
    _emit(args, rep.to_json(), (header, rows))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_extract(args) -> int:
    f = _load_map(args)
    points = args.point or ["0"]
    out, rows = [], []
    for text in points:
        x = np.array(_floats(text, 4))
        fr = diff_lab.frame(f, x, args.side)
        jet = diff_lab.extract_jet3(f, x, fr.side)
        d = fr.to_json()
        d["jet"] = jet.to_json()
        out.append(d)
        rows.append([*x, fr.side, fr.side_report.side.value, *fr.C.to_array(), fr.consistency, jet.cross_check])
    header = ["x0", "x1", "x2", "x3", "side", "detected", "C0", "C1", "C2", "C3", "consistency", "cross_check"]
    _emit(args, {"points": out}, (header, rows))
    return EXIT_OK


def cmd_synth(args) -> int:
    p, q, C = _floats(args.p, 4), _floats(args.q, 4), _number(args.C)
    f = map_zoo.synth_from_jet(p, q, C)
    target = map_zoo.admissible_jet(p, q, C)
    jet = diff_lab.extract_jet3(f, np.zeros(4))
    ok, errors = verifier.jet_match(jet, target, args.tol_jet)
    circles = verifier.verify_lines_to_circles(
        f, 0.0, args.radius, args.segments, args.samples, args.tol_circle or 1e-7, args.seed
    )
    passed = ok and circles.passed
    payload = {
        "map": f.to_json(),
        "target_jet": target.to_json(),
        "extracted_jet": jet.to_json(),
        "jet_errors": errors,
        "jet_match": ok,
        "lines_to_circles": circles.verdicts["lines_to_circles"],
        "circle_max_residual": circles.residuals["circle_max"],
        "passed": passed,
    }
    rows = [[k, v] for k, v in errors.items()]
    _emit(args, payload, (["coefficient", "abs_error"], rows))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_dump_segments(args) -> int:
    f = _load_map(args)
    rng = np.random.default_rng(args.seed)
    center = np.array(_floats(args.center, 4))
    t = np.linspace(0.0, 1.0, args.samples)
    rows, segs = [], []
    for k in range(args.segments):
        seg = verifier.random_segment(rng, center, args.radius)
        pre = seg.points(args.samples)
        img = np.asarray(f(pre), dtype=float)
        segs.append({"segment": k, "t": t.tolist(), "preimage": pre.tolist(), "image": img.tolist()})
        rows += [[k, t[i], *pre[i], *img[i]] for i in range(args.samples)]
    header = ["segment", "t"] + [f"x{i}" for i in range(4)] + [f"f{i}" for i in range(4)]
    _emit(args, {"segments": segs}, (header, rows))
    return EXIT_OK


def cmd_lemma1(args) -> int:
    a, x, b = (_floats(v, 4) for v in (args.a, args.x, args.b))
    const, spread = verifier.lemma1_oracle(a, x, b, args.trials, args.seed, args.tol_lemma)
    payload = {"a": a, "x": x, "b": b, "trials": args.trials, "is_constant": const, "spread": spread}
    _emit(args, payload, (["is_constant", "spread"], [[const, spread]]))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0)

    mapped = argparse.ArgumentParser(add_help=False)
    mapped.add_argument("--map", help="inline JSON map spec")
    mapped.add_argument("--map-file", help="path to a JSON map spec")

    ball = argparse.ArgumentParser(add_help=False)
    ball.add_argument("--center", default="0", help="ball center w,x,y,z (default 0)")
    ball.add_argument("--radius", type=float, default=0.4)
    ball.add_argument("--segments", type=int, default=50)
    ball.add_argument("--samples", type=int, default=9)
    ball.add_argument("--tol-circle", type=float, default=None)

    p = argparse.ArgumentParser(prog="quatline", description="Line-to-circle map laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common, mapped, ball], help="sampling check and residual suite")
    v.add_argument("--points", type=int, default=10)
    v.add_argument("--tol-residual", type=float, default=None)

    e = sub.add_parser("extract", parents=[common, mapped], help="invariants A, B, C and the 3-jet at points")
    e.add_argument("--point", action="append", help="w,x,y,z (repeatable; default 0)")
    e.add_argument("--side", choices=("left", "right"), default=None)

    s = sub.add_parser("synth", parents=[common, ball], help="classical projection with a given admissible jet")
    s.add_argument("--p", default="0", help="real covector p as 4 numbers")
    s.add_argument("--q", default="0", help="quaternion q")
    s.add_argument("--C", default="0", help="real C")
    s.add_argument("--tol-jet", type=float, default=1e-5)
    s.set_defaults(radius=0.2)

    d = sub.add_parser("dump-segments", parents=[common, mapped, ball], help="mapped samples of random segments")
    d.set_defaults(segments=1)

    lm = sub.add_parser("lemma1", parents=[common], help="is a y + b y^-1 constant on a conjugacy class?")
    lm.add_argument("--a", required=True)
    lm.add_argument("--x", required=True)
    lm.add_argument("--b", required=True)
    lm.add_argument("--trials", type=int, default=16)
    lm.add_argument("--tol-lemma", type=float, default=1e-10)
    return p


COMMANDS = {
    "verify": cmd_verify,
    "extract": cmd_extract,
    "synth": cmd_synth,
    "dump-segments": cmd_dump_segments,
    "lemma1": cmd_lemma1,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        _check_common(args)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"quatline: error: {e}", file=sys.stderr)
    except QuatlineError as e:
        print(f"quatline: {type(e).__name__}: {e}", file=sys.stderr)
    except (ValueError, FloatingPointError) as e:
        print(f"quatline: error: {e}", file=sys.stderr)
    return EXIT_USAGE


__all__ = ["main", "build_parser"]
