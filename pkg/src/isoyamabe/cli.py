"""Command-line front end.

Every run produces named artifacts (CSV with ``#`` header comments, or JSON)
and a JSON RunRecord.  With ``--out DIR`` all artifacts and ``record.json`` are
written there; otherwise the primary artifact goes to stdout and the record to
stderr.  Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import (BifurcationError, ProductData, branch_to_metric, continue_branch,
                          kernel_check, product_bifurcation_times)
from .curves import CurveError
from .discretize import DiscretizationError, build_grid
from .geometry import geodesic_distance, mean_curvature_of_level
from .hanli import ConstraintSpec, c_sample, find_prescribed_mean_curvature, minimize_constrained
from .profile import (IsoparametricProfile, ProfileError, load_profile, profile_by_name,
                      validate_profile)
from .spectra import SpectrumError, conformal_eigen_probe, neumann_spectrum
from .yamabe import SolveOptions, SolverError, minimize_quotient

DOMAIN_ERRORS = (ProfileError, CurveError, DiscretizationError, SpectrumError, SolverError,
                 BifurcationError, ValueError, ArithmeticError)


class UsageError(Exception):
    pass


@dataclass
class RunRecord:
    command: str
    argv: list[str]
    flags: dict
    profile_hash: str | None
    grid: dict | None
    tolerances: dict
    seed: int
    version: str
    started_at: str
    wall_clock_s: float = 0.0
    outputs: dict = field(default_factory=dict)
    exit_code: int = 0
    error: str | None = None


# -- formatting ----------------------------------------------------------------


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(columns: list[tuple[str, str]], rows, notes: list[str] = ()) -> str:
    """CSV with a ``#`` header naming every column and its unit."""
    buf = io.StringIO()
    for note in notes:
        buf.write(f"# {note}\n")
    for name, unit in columns:
        buf.write(f"# {name}: {unit}\n")
    buf.write(",".join(n for n, _ in columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


# -- shared inputs ---------------------------------------------------------------


def _profile(args) -> IsoparametricProfile:
    if args.profile and args.profile_file:
        raise UsageError("give only one of --profile and --profile-file")
    if args.profile:
        return profile_by_name(args.profile)
    if args.profile_file:
        return load_profile(args.profile_file)
    raise UsageError("one of --profile or --profile-file is required")


def _grading(text):
    if text is None or text in ("none", "uniform"):
        return None
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"--grade must be none, auto or a number, got {text!r}") from exc


def _grid(args, prof):
    return build_grid(prof, args.cells, _grading(args.grade))


def _plot_data(grid, gf, name="phi") -> str:
    cols = [("t", "profile parameter of the level set"), (name, "dimensionless radial function value")]
    t, v = gf.samples()
    rows = list(zip(t.tolist(), v.tolist()))
    return csv_text(cols, rows)


# -- subcommands -----------------------------------------------------------------
# each returns (artifacts: dict name -> text, primary name, tolerances dict)


def cmd_validate(args, rec):
    prof = _profile(args)
    rep = validate_profile(prof)
    out = {"name": prof.name, "dim": prof.dim, "usable": rep.usable, "violations": rep.violations,
           "k_f": prof.k_f if rep.usable else None}
    if not rep.usable:
        raise ProfileError("profile invalid: " + "; ".join(rep.violations))
    return {"validate.json": json_text(out)}, "validate.json", {}


def cmd_curvature(args, rec):
    prof = _profile(args)
    ta, tb = prof.interval
    ts = np.linspace(ta, tb, args.samples)
    keep = [t for t in ts if float(prof.b(t)) > 0]
    rows = [(t, mean_curvature_of_level(prof, t)) for t in keep]
    notes = [f"boundary mean curvature at t={e.param!r} (orientation {e.orientation:+d}): "
             f"{prof.boundary_mean_curvature(e)!r}" for e in prof.boundary_components]
    cols = [("t", "profile parameter"), ("mean_curvature", "averaged mean curvature of the level, 1/length, unit normal grad f/|grad f|")]
    return {"curvature.csv": csv_text(cols, rows, notes)}, "curvature.csv", {}


def cmd_distance(args, rec):
    prof = _profile(args)
    t1 = prof.t_lo if args.t1 is None else args.t1
    t2 = prof.t_hi if args.t2 is None else args.t2
    d = geodesic_distance(prof, t1, t2)
    cols = [("t1", "profile parameter"), ("t2", "profile parameter"), ("distance", "geodesic length between level sets")]
    return {"distance.csv": csv_text(cols, [(t1, t2, d)])}, "distance.csv", {}


def cmd_spectrum(args, rec):
    prof = _profile(args)
    grid = _grid(args, prof)
    res = neumann_spectrum(prof, grid, args.count)
    cols = [("index", "eigenvalue index i (0 is the constant mode)"), ("eigenvalue", "mu_i of the positive Laplacian, 1/length^2"),
            ("error_estimate", "|mu_fine - mu_coarse|/3, same unit; empty when not computed")]
    rows = [(i, mu, None if math.isnan(e) else e) for i, (mu, e) in enumerate(zip(res.eigenvalues, res.error_estimates))]
    arts = {"spectrum.csv": csv_text(cols, rows)}
    if args.dump_eigenfunctions:
        for i, gf in enumerate(res.eigenfunctions):
            arts[f"eigenfunction_{i}.csv"] = _plot_data(grid, gf, f"v_{i}")
    return arts, "spectrum.csv", {}


def cmd_probe(args, rec):
    prof = _profile(args)
    grid = _grid(args, prof)
    res = conformal_eigen_probe(prof, grid, sign_tol=args.sign_tol)
    return {"probe.json": json_text(res.to_json())}, "probe.json", {"sign_tol": args.sign_tol}


def cmd_yamabe(args, rec):
    prof = _profile(args)
    grid = _grid(args, prof)
    s = args.s if args.s is not None else (prof.p_n if args.mode == "interior" else prof.p_bdry)
    opts = SolveOptions(tol=args.tol, boundary_tol=args.boundary_tol, init=args.init, seed=args.seed)
    rep = minimize_quotient(prof, grid, s, args.mode, opts)
    return ({"yamabe.json": json_text(rep.to_json()), "yamabe_phi.csv": _plot_data(grid, rep.minimizer)},
            "yamabe.json", {"tol": args.tol, "boundary_tol": args.boundary_tol})


HANLI_COLS = [("a", "interior weight, dimensionless"), ("b", "boundary weight, dimensionless"),
              ("Y_ab", "constrained minimum energy"), ("A", "a p N_p + b q N_q at the minimizer, dimensionless"),
              ("c_ab", "boundary constant of the rescaled solution, 1/length"),
              ("lower", "lower bound on c_ab, 1/length"), ("upper", "upper bound on c_ab (b > 0 only), 1/length"),
              ("residual_interior", "relative Euler-Lagrange residual"),
              ("residual_boundary", "boundary Euler-Lagrange residual"), ("flags", "bound violations, ';'-separated")]


def _hanli_row(smp):
    return (smp.a, smp.b, smp.Y, smp.A, smp.c, smp.lower, smp.upper, smp.residual_interior,
            smp.residual_boundary, ";".join(smp.flags))


def cmd_hanli(args, rec):
    if args.c_target is not None and (args.a is not None or args.b is not None):
        raise UsageError("--c-target cannot be combined with --a/--b")
    prof = _profile(args)
    grid = _grid(args, prof)
    opts = SolveOptions(tol=args.tol, boundary_tol=args.boundary_tol, seed=args.seed)
    tols = {"tol": args.tol, "boundary_tol": args.boundary_tol}
    if args.c_target is not None:
        res = find_prescribed_mean_curvature(prof, grid, args.c_target, options=opts)
        out = {"a": res.a, "b": res.b, "c": res.c, "evaluations": res.evaluations, "certificate": res.certificate}
        return ({"hanli_prescribed.json": json_text(out), "hanli_v.csv": _plot_data(grid, res.v, "v")},
                "hanli_prescribed.json", tols)
    a_list = _floats(args.a) if args.a is not None else [1.0]
    b_list = _floats(args.b) if args.b is not None else [0.0]
    rows, prev = [], None
    for a in a_list:
        for b in b_list:
            res = minimize_constrained(prof, grid, ConstraintSpec(a, b, args.p, args.q), opts, init=prev)
            prev = res.minimizer
            rows.append(_hanli_row(c_sample(prof, res)))
    return {"hanli.csv": csv_text(HANLI_COLS, rows)}, "hanli.csv", tols


BIF_COLS = [("i", "branch index"), ("r", "branch parameter <u - 1, v_i> in the weighted L2 product"),
            ("lambda", "eigenvalue parameter of F^s, 1/length^2"),
            ("gamma", "product scale realizing lambda, dimensionless"),
            ("t_i", "bifurcation scale of branch i, dimensionless"),
            ("distance_to_trivial", "sup |u - 1|"), ("residual", "weighted RMS of F^s(u, lambda)")]


def cmd_bifurcate(args, rec):
    base = _profile(args)
    grid = _grid(args, base)
    prod = ProductData(base, args.factor_dim, args.factor_scalar, args.factor_volume)
    s = args.s if args.s is not None else prod.p_N
    spec = neumann_spectrum(base, grid, args.modes + 1, estimate_error=False)
    mus = spec.eigenvalues[1:]
    times = product_bifurcation_times(base.dim, prod.s_g, args.factor_scalar, args.factor_dim, mus)
    t_of = {bt.i: bt.t for bt in times.times}
    rows, certs = [], []
    for i in range(1, args.modes + 1):
        branch = continue_branch(base, grid, s, i, r_max=args.r_max, steps=args.steps)
        entry = {"i": i, "mu": float(mus[i - 1]), "lambda_i": branch.lambda_i, "t_i": t_of.get(i),
                 "kernel": kernel_check(base, grid, s, i), "truncated": branch.truncated,
                 "diagnostics": branch.diagnostics, "certificates": []}
        for smp in branch.samples:
            try:
                gamma = prod.t_of_lambda(smp.lam)
            except BifurcationError:
                gamma = None
            rows.append((i, smp.r, smp.lam, gamma, t_of.get(i), smp.distance_to_trivial, smp.residual))
            if smp.r > 0 and gamma is not None and s == prod.p_N:
                entry["certificates"].append({"r": smp.r, **branch_to_metric(prod, smp, t_of.get(i))})
        certs.append(entry)
    out = {"product": {"base": base.name, "factor_dim": args.factor_dim, "factor_scalar": args.factor_scalar,
                       "s": s, "notices": times.notices}, "branches": certs}
    return ({"bifurcate.csv": csv_text(BIF_COLS, rows), "bifurcate_certificates.json": json_text(out)},
            "bifurcate.csv", {"newton_residual": 1e-10})


# -- sweep -----------------------------------------------------------------------


def _sweep_job(job):
    """Worker: rebuilds everything from plain data."""
    task, prof_src, cells, grade, param, seed = job
    prof = profile_by_name(prof_src["name"]) if "name" in prof_src else load_profile(prof_src["file"])
    grid = build_grid(prof, cells, grade)
    if task == "spectrum":
        res = neumann_spectrum(prof, grid, int(param), estimate_error=False)
        return [(cells, i, None, mu, None) for i, mu in enumerate(res.eigenvalues)]
    if task == "yamabe":
        mode, s = param
        rep = minimize_quotient(prof, grid, s, mode, SolveOptions(seed=seed))
        return [(cells, mode, s, rep.value, rep.residuals.interior)]
    a, b = param
    res = minimize_constrained(prof, grid, ConstraintSpec(a, b), SolveOptions(seed=seed))
    return [(cells, a, b, res.value, res.c_ab)]


def _workers() -> int:
    env = os.environ.get("ISOYAMABE_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"ISOYAMABE_THREADS must be an integer, got {env!r}") from exc
    return cap


def cmd_sweep(args, rec):
    prof = _profile(args)  # validates the input before fanning out
    src = {"name": args.profile} if args.profile else {"file": args.profile_file}
    cells = [int(c) for c in _floats(args.cells_list)]
    grade = _grading(args.grade)
    if args.task == "spectrum":
        params = [args.count]
        cols = [("cells", "grid size"), ("index", "eigenvalue index"), ("unused", "empty"),
                ("eigenvalue", "mu_i, 1/length^2"), ("unused2", "empty")]
    elif args.task == "yamabe":
        s_list = _floats(args.s_list) if args.s_list else [prof.p_n if args.mode == "interior" else prof.p_bdry]
        params = [(args.mode, s) for s in s_list]
        cols = [("cells", "grid size"), ("mode", "interior or boundary"), ("s", "exponent"),
                ("value", "minimum of the quotient"), ("residual_interior", "relative Euler-Lagrange residual")]
    else:
        params = [(a, b) for a in _floats(args.a_list) for b in _floats(args.b_list)]
        cols = [("cells", "grid size"), ("a", "interior weight"), ("b", "boundary weight"),
                ("Y_ab", "constrained minimum energy"), ("c_ab", "boundary constant, 1/length")]
    jobs = [(args.task, src, c, grade, prm, args.seed) for c in cells for prm in params]
    workers = min(_workers(), len(jobs))
    if workers <= 1:
        results = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    rows = [row for res in results for row in res]  # job order is canonical
    rec.flags["workers"] = workers
    return {"sweep.csv": csv_text(cols, rows)}, "sweep.csv", {}


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", help="factory name, e.g. hemisphere:3, band:3:0.2:0.9, cap:3:0.1, cylinder, BASE/NF:SH:T")
    common.add_argument("--profile-file", help="JSON profile document")
    common.add_argument("--cells", type=int, default=400, help="number of finite-volume cells")
    common.add_argument("--grade", default=None, help="grading at focal ends: none, auto or an exponent")
    common.add_argument("--out", help="directory for artifacts and record.json")
    common.add_argument("--seed", type=int, default=0, help="seed for random initial data")

    ap = argparse.ArgumentParser(prog="isoyamabe", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"isoyamabe {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check profile invariants").set_defaults(func=cmd_validate)

    p = sub.add_parser("curvature", parents=[common], help="mean curvature of level sets")
    p.add_argument("--samples", type=int, default=101)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("distance", parents=[common], help="distance between two level sets")
    p.add_argument("--t1", type=float)
    p.add_argument("--t2", type=float)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("spectrum", parents=[common], help="radial Neumann spectrum")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--dump-eigenfunctions", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("probe", parents=[common], help="signs of first conformal eigenvalues")
    p.add_argument("--sign-tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("yamabe", parents=[common], help="minimize the subcritical quotient")
    p.add_argument("--mode", choices=("interior", "boundary"), default="interior")
    p.add_argument("--s", type=float, help="exponent (default critical for the mode)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--boundary-tol", type=float, default=1e-8)
    p.add_argument("--init", choices=("constant", "random"), default="constant")
    p.set_defaults(func=cmd_yamabe)

    p = sub.add_parser("hanli", parents=[common], help="weighted constrained minimization")
    p.add_argument("--a", help="comma-separated interior weights")
    p.add_argument("--b", help="comma-separated boundary weights")
    p.add_argument("--p", type=float, help="interior exponent (default critical)")
    p.add_argument("--q", type=float, help="boundary exponent (default critical)")
    p.add_argument("--c-target", type=float, help="solve for a prescribed boundary constant")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--boundary-tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_hanli)

    p = sub.add_parser("bifurcate", parents=[common], help="branches from the product metric")
    p.add_argument("--factor-dim", type=int, required=True)
    p.add_argument("--factor-scalar", type=float, required=True)
    p.add_argument("--factor-volume", type=float, default=1.0)
    p.add_argument("--s", type=float, help="exponent (default p of the product dimension)")
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--r-max", type=float, default=0.05)
    p.add_argument("--steps", type=int, default=200)
    p.set_defaults(func=cmd_bifurcate)

    p = sub.add_parser("sweep", parents=[common], help="parallel parameter sweep")
    p.add_argument("--task", choices=("spectrum", "yamabe", "hanli"), required=True)
    p.add_argument("--cells-list", default="100,200,400")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--mode", choices=("interior", "boundary"), default="interior")
    p.add_argument("--s-list")
    p.add_argument("--a-list", default="1")
    p.add_argument("--b-list", default="0")
    p.set_defaults(func=cmd_sweep)
    return ap


def _record(args, argv) -> RunRecord:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return RunRecord(command=args.command, argv=list(argv), flags=flags, profile_hash=None, grid=None,
                     tolerances={}, seed=args.seed, version=__version__,
                     started_at=datetime.now(timezone.utc).isoformat(timespec="seconds"))


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    rec = _record(args, argv)
    t0 = time.perf_counter()
    try:
        try:
            prof = _profile(args)
            rec.profile_hash = prof.fingerprint()
        except DOMAIN_ERRORS:
            prof = None
        if prof is not None and args.command not in ("validate", "curvature", "distance"):
            rec.grid = {"cells": args.cells, "grade": args.grade}
        arts, primary, tols = args.func(args, rec)
        rec.tolerances = tols
        code = 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        print(f"error: {rec.error}", file=stderr)
        arts, primary, code = {}, None, 1
    rec.exit_code = code
    rec.wall_clock_s = time.perf_counter() - t0
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in arts.items():
            (out / name).write_text(text)
        rec.outputs = {name: str(out / name) for name in arts}
        (out / "record.json").write_text(json_text(asdict(rec)))
    else:
        if primary is not None:
            stdout.write(arts[primary])
        rec.outputs = dict(arts)
        stderr.write(json.dumps(asdict(rec), sort_keys=True, default=_json_default) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
