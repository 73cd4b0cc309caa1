"""Command-line front end.

    cdrsim list-families
    cdrsim verify SPEC [--tol 1e-8] [--continuity-tol 1e-6] [--points 50]
    cdrsim verify-pde SPEC [--grid nx,nt] [--window t0,t1] [--levels k] [--xrange a,b]
    cdrsim plot-data SPEC [--times t1,t2,...] [--xrange a,b,n] [--out FILE]
    cdrsim make-equivalent SPEC --out FILE

Exit codes: 0 success, 1 certification failure or diverged run, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys as _sys
from pathlib import Path

import numpy as np

from . import expr as ex
from .equivalence import (EquivalenceError, EquivalentSpec, continuity_identity_check,
                          equivalent_rho, equivalent_system)
from .families import ContinuityViolation, FamilyError, catalog, descriptor
from .pde import Grid1D, PDEDivergenceError, refinement_study
from .quadrature import QuadratureError
from .reduced_ode import CertificationError, certify, continuity_report, truncation_extent
from .scaling import ScalingError, physical_fields, reconstruct_W
from .specfile import SpecError, build_system, load_spec, system_to_doc

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("cdrsim")


class UsageError(ValueError):
    pass


def _emit(obj, stream=None) -> None:
    stream = stream or _sys.stdout
    stream.write(json.dumps(obj, indent=2) + "\n")


def _floats(text: str, count: int, label: str) -> list:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{label}: expected comma-separated numbers, got {text!r}") from None
    if count and len(vals) != count:
        raise UsageError(f"{label}: expected {count} values, got {len(vals)}")
    return vals


# --------------------------------------------------------------------------
# list-families


def cmd_list_families(args) -> int:
    rows = [("id", "domain", "conserving", "parameters", "notes")]
    for d in catalog():
        notes = d.summary
        if d.alpha_fixed is not None:
            notes += f"; alpha forced to {d.alpha_fixed:g}"
        rows.append((d.id, d.domain.kind.value, str(d.conserving).lower(),
                     ", ".join(p.describe() for p in d.params), notes))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    for r in rows:
        cells = [c.ljust(w) for c, w in zip(r[:4], widths)]
        print("  ".join(cells + [r[4]]).rstrip())
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    spec = load_spec(args.spec)
    report = {"name": spec.name, "family": spec.family, "alpha": spec.alpha, "mu": spec.mu}
    try:
        system = build_system(spec, certify_now=False)
    except (CertificationError, ContinuityViolation) as err:
        report.update(certified=False, error=str(err))
        _emit(report)
        return EXIT_FAIL
    cert = certify(system, points=args.points, tol=args.tol)
    report["certification"] = cert.to_dict()
    try:
        cont = continuity_report(system, tol=args.continuity_tol)
        report["continuity"] = cont.to_dict()
        cont_ok = cont.satisfied
    except QuadratureError as err:
        report["continuity"] = {"error": str(err), "satisfied": False}
        cont_ok = False
    report["certified"] = bool(cert.passed and cont_ok)
    _emit(report)
    return EXIT_OK if report["certified"] else EXIT_FAIL


# --------------------------------------------------------------------------
# verify-pde


def default_xrange(system, spec, t0: float, t1: float) -> tuple:
    """x window: the family's stated range, else the truncated z-domain mapped to x."""
    if spec.is_family and descriptor(spec.family).pde_xrange is not None:
        return descriptor(spec.family).pde_xrange
    ext = truncation_extent(system)
    if ext.divergent:
        raise UsageError("profile does not decay; pass --xrange explicitly")
    scales = [t0 ** system.alpha, t1 ** system.alpha]
    lo = min(ext.lo * s for s in scales)
    hi = max(ext.hi * s for s in scales)
    return (lo, hi)


def cmd_verify_pde(args) -> int:
    spec = load_spec(args.spec)
    system = build_system(spec)
    nx, nt = _floats(args.grid, 2, "--grid")
    t0, t1 = _floats(args.window, 2, "--window")
    if args.levels < 1:
        raise UsageError("--levels must be at least 1")
    if args.xrange:
        x_min, x_max = _floats(args.xrange, 2, "--xrange")
    else:
        x_min, x_max = default_xrange(system, spec, t0, t1)
    try:
        grid = Grid1D(x_min, x_max, int(nx), t0, t1, int(nt))
    except ValueError as err:
        raise UsageError(str(err)) from None
    report = {"name": spec.name, "xrange": [x_min, x_max], "window": [t0, t1],
              "grid": [grid.nx, grid.nt]}
    try:
        study = refinement_study(system, grid, args.levels)
    except PDEDivergenceError as err:
        report.update(error=str(err), step=err.step, time=err.time)
        _emit(report)
        return EXIT_FAIL
    report.update(study.to_dict())
    _emit(report)
    return EXIT_OK


# --------------------------------------------------------------------------
# plot-data


def plot_rows(system, times, xs):
    """(x, t, C, D, R, W) rows ordered by t then x."""
    for t in times:
        c, d, r = physical_fields(system, xs, t)
        w = reconstruct_W(system, xs, t)
        cols = [np.broadcast_to(np.asarray(v, dtype=float), xs.shape) for v in (c, d, r, w)]
        for i, x in enumerate(xs):
            yield (x, t) + tuple(col[i] for col in cols)


def cmd_plot_data(args) -> int:
    spec = load_spec(args.spec)
    system = build_system(spec)
    times = _floats(args.times, 0, "--times")
    if any(t <= 0 for t in times):
        raise UsageError("--times must be positive")
    if args.xrange:
        a, b, n = _floats(args.xrange, 3, "--xrange")
        n = int(n)
    else:
        (a, b), n = default_xrange(system, spec, min(times), max(times)), 201
    if n < 2 or not b > a:
        raise UsageError("--xrange needs a < b and n >= 2")
    xs = np.linspace(a, b, n)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "t", "C", "D", "R", "W"])
    for row in plot_rows(system, times, xs):
        writer.writerow([f"{float(v):.17g}" for v in row])
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        _sys.stdout.write(buf.getvalue())
    return EXIT_OK


# --------------------------------------------------------------------------
# make-equivalent


def cmd_make_equivalent(args) -> int:
    spec = load_spec(args.spec)
    if spec.equivalent is None:
        raise UsageError("spec has no 'equivalent' block")
    base = build_system(spec)
    try:
        eq_spec = EquivalentSpec.parse(spec.equivalent["tilde_sigma"],
                                       spec.equivalent["tilde_tau"], base)
        rho_tilde = equivalent_rho(base, eq_spec)
    except ex.ExprError as err:
        raise SpecError(f"expression error in equivalent block: {err}") from None
    report = {"name": spec.name, "rho_tilde": ex.render(rho_tilde)}
    try:
        new = equivalent_system(base, eq_spec, name=f"{spec.name}-equivalent")
    except CertificationError as err:
        report.update(certified=False, error=str(err))
        _emit(report)
        return EXIT_FAIL
    report["certification"] = certify(new).to_dict()
    ext = truncation_extent(base)
    ident = continuity_identity_check(base, new, window=(ext.lo, ext.hi))
    report["identity"] = {"lhs": ident.lhs, "rhs": ident.rhs,
                          "difference": ident.difference, "window": list(ident.window)}
    doc = system_to_doc(new, new.name)
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    report["out"] = str(args.out)
    report["certified"] = True
    _emit(report)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdrsim",
        description="Exactly solvable convection-diffusion-reaction systems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-families", help="show the solvable family catalog")
    p.set_defaults(func=cmd_list_families)

    p = sub.add_parser("verify", help="certify a system spec")
    p.add_argument("spec")
    p.add_argument("--tol", type=float, default=1e-8, help="residual tolerance")
    p.add_argument("--continuity-tol", type=float, default=1e-6)
    p.add_argument("--points", type=int, default=50, help="interior sample points")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("verify-pde", help="check the closed form against a PDE solve")
    p.add_argument("spec")
    p.add_argument("--grid", default="101,200", help="base grid nx,nt")
    p.add_argument("--window", default="1,2", help="time window t0,t1")
    p.add_argument("--levels", type=int, default=3, help="refinement levels")
    p.add_argument("--xrange", help="space window a,b")
    p.set_defaults(func=cmd_verify_pde)

    p = sub.add_parser("plot-data", help="write x,t,C,D,R,W curves as CSV")
    p.add_argument("spec")
    p.add_argument("--times", default="1,2,3")
    p.add_argument("--xrange", help="a,b,n")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("make-equivalent", help="derive an equivalent system spec")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_equivalent)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SpecError, UsageError, EquivalenceError, ScalingError) as err:
        print(f"error: {err}", file=_sys.stderr)
        return EXIT_INPUT
    except ContinuityViolation as err:
        print(f"error: {err}", file=_sys.stderr)
        return EXIT_FAIL
    except FamilyError as err:
        print(f"error: {err}", file=_sys.stderr)
        return EXIT_INPUT
    except (CertificationError, QuadratureError) as err:
        print(f"error: {err}", file=_sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
