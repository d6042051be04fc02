"""Command-line driver.

Subcommands ``sample``, ``solve``, ``convergence``, ``eig`` and ``spectrum``
write a JSON manifest (to ``--out`` or stdout). Exit codes: 0 success,
2 usage, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .boundary import dirichlet, neumann
from .eigen import EigenError, cluster_errors, smallest_eigs
from .geometry import GeometryError
from .laplacian import discretize
from .sampling import (
    SHAPES,
    NEUMANN_DATA,
    CloudFormatError,
    SamplerError,
    SamplerSpec,
    distance_to_manifold,
    eigen_count,
    exact_eigenvalue,
    manufactured_problem,
    sample,
    write_cloud,
)
from .solver import (
    FULL_SPECTRUM_LIMIT,
    SOLVERS,
    SolverError,
    align_mean,
    rank_deficiency_fix,
    solve,
    splitting_spectrum,
)
from .stencil import METHODS, AssemblyError, row_diagnostics

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# manufactured case -> analytic shape it is defined on
CASES = {"trig": "circle", "coordinate": "sphere", "quadratic": "line", "height": "hemisphere"}
DEFAULT_CASE = {"circle": "trig", "sphere": "coordinate", "line": "quadratic", "hemisphere": "height"}
DEFAULT_HARMONICS = {"sphere": [4, 8], "circle": [1, 2], "line": [1, 2]}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    shape: str | None
    mode: str
    n: int | None
    dx: float | None
    seed: int
    path: str | None
    boundary_points: int | None
    k: int | None
    kb: int
    weights: str | None
    method: str
    bc: str | None
    solver: str
    tol: float
    nullspace: str
    case: str | None
    eigs: int | None
    harmonics: tuple | None
    sizes: tuple | None
    spectrum_mode: str
    out: str | None
    csv: str | None
    save: str | None

    @property
    def sampler(self) -> dict:
        return {"shape": self.shape or "file", "mode": self.mode, "n": self.n, "dx": self.dx,
                "seed": self.seed, "path": self.path, "boundary_points": self.boundary_points}


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("cloud")
    g.add_argument("--shape", choices=[s for s in SHAPES if s != "file"])
    g.add_argument("--mode", choices=sorted({m for ms in SHAPES.values() for m in ms} - {"file"}))
    g.add_argument("--n", type=int, help="number of points")
    g.add_argument("--dx", type=float, help="grid spacing for gbpm sampling")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--in", dest="path", metavar="PATH", help="read the cloud from a text file")
    g.add_argument("--boundary-points", type=int, help="equator points for hemisphere clouds")
    g = common.add_argument_group("discretization")
    g.add_argument("--k", type=int, help="neighbors per point (default 4 on curves, 16 on surfaces)")
    g.add_argument("--kb", type=int, default=5, help="boundary neighbors for boundary tangents")
    g.add_argument("--weights", choices=["center", "unit"],
                   help="fit weights (default: unit for mvgd, center for mls)")
    g.add_argument("--form", choices=["nondiv", "div"], default="nondiv")
    g.add_argument("--method", choices=METHODS, default="mvgd")
    g.add_argument("--bc", choices=["dirichlet", "neumann"])
    g = common.add_argument_group("solvers")
    g.add_argument("--solver", choices=SOLVERS, default="amg")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--nullspace", choices=["pin", "lagrange"], default="pin",
                   help="closed-manifold regularization")
    g.add_argument("--case", choices=sorted(CASES), help="manufactured problem")
    g.add_argument("--eigs", type=int, help="number of eigenpairs")
    g.add_argument("--harmonics", type=_int_list, help="harmonic indices, e.g. 4,8")
    g.add_argument("--sizes", help="convergence sizes (n values, or dx values for gbpm)")
    g.add_argument("--spectrum-mode", choices=["full", "radius"], default="full")
    g = common.add_argument_group("output")
    g.add_argument("--out", help="JSON manifest path (default: stdout)")
    g.add_argument("--csv", help="CSV output path")
    g.add_argument("--save", help="write the cloud with values (eig: file prefix)")

    p = argparse.ArgumentParser(prog="pointlb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [("sample", "generate a point cloud"),
                       ("solve", "solve a manufactured Laplace-Beltrami problem"),
                       ("convergence", "error versus resolution"),
                       ("eig", "smallest eigenpairs and cluster errors"),
                       ("spectrum", "Gauss-Seidel splitting spectra, mvgd vs mls")]:
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def make_config(args) -> RunConfig:
    if args.path and (args.shape or args.mode or args.n is not None or args.dx is not None):
        raise UsageError("--in cannot be combined with --shape/--mode/--n/--dx")
    if not args.path and not args.shape:
        raise UsageError("give --shape or --in")
    if args.n is not None and args.dx is not None:
        raise UsageError("--n and --dx are mutually exclusive")
    if args.form == "div":
        if args.method == "mls":
            raise UsageError("--form div applies to the mvgd method only")
        method = "mvgd-div"
    else:
        method = args.method
    for name in ("n", "dx", "k", "kb", "tol", "eigs", "boundary_points"):
        v = getattr(args, name)
        if v is not None and not v > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")
    mode = "file" if args.path else (args.mode or ("gbpm" if args.dx is not None else "uniform"))
    sizes = None
    if args.sizes is not None:
        try:
            sizes = _float_list(args.sizes) if mode == "gbpm" else _int_list(args.sizes)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
        if any(not s > 0 for s in sizes):
            raise UsageError("--sizes must be positive")
    if args.harmonics is not None and any(h < 0 for h in args.harmonics):
        raise UsageError("--harmonics must be nonnegative")
    return RunConfig(
        command=args.command, shape=args.shape, mode=mode, n=args.n, dx=args.dx, seed=args.seed,
        path=args.path, boundary_points=args.boundary_points, k=args.k, kb=args.kb,
        weights=args.weights, method=method, bc=args.bc, solver=args.solver, tol=args.tol,
        nullspace=args.nullspace, case=args.case, eigs=args.eigs,
        harmonics=tuple(args.harmonics) if args.harmonics else None, sizes=sizes,
        spectrum_mode=args.spectrum_mode, out=args.out, csv=args.csv, save=args.save)


def load_cloud(cfg: RunConfig):
    try:
        spec = SamplerSpec(cfg.shape or "file", cfg.mode, cfg.n, cfg.dx, cfg.seed, cfg.path,
                           cfg.boundary_points)
    except SamplerError as exc:
        raise UsageError(str(exc)) from None
    if spec.shape == "file":
        try:
            return sample(spec)
        except (OSError, CloudFormatError, GeometryError) as exc:
            raise InputError(f"{cfg.path}: {exc}") from None
    try:
        return sample(spec)
    except SamplerError as exc:
        raise UsageError(str(exc)) from None


def _condition(cfg, cloud):
    has_bnd = bool(cloud.boundary.any())
    if has_bnd and cfg.bc is None:
        raise UsageError("the cloud has boundary points; pass --bc")
    if not has_bnd and cfg.bc is not None:
        raise UsageError("--bc given but the cloud has no boundary points")
    if cfg.bc is None:
        return None
    return dirichlet(0.0) if cfg.bc == "dirichlet" else neumann(0.0)


def _discretize(cfg, cloud, condition, method=None):
    return discretize(cloud, k=cfg.k, method=method or cfg.method, weights=cfg.weights,
                      condition=condition, kb=cfg.kb)


def _stats(disc) -> dict:
    h = disc.stencils.h
    return {"min": float(h.min()), "mean": float(h.mean()), "max": float(h.max()),
            "extrapolated_points": int(np.count_nonzero(disc.stencils.extrapolated)),
            "linear_fallback_points": int(np.count_nonzero(disc.stencils.linear_fallback))}


def _base_manifest(cfg, cloud, disc=None) -> dict:
    out = {"command": cfg.command, "sampler": cfg.sampler, "n": int(cloud.n),
           "boundary_points": int(cloud.boundary.sum())}
    if disc is not None:
        out["problem"] = {"method": disc.method, "weights": cfg.weights or "default",
                          "bc": cfg.bc, "case": cfg.case}
        out["k"] = int(disc.k)
        out["h_stats"] = _stats(disc)
    return out


def _solve_once(cfg, cloud):
    case = cfg.case or DEFAULT_CASE.get(cfg.shape)
    if case is None:
        raise UsageError("no manufactured problem for this cloud; pass --case")
    shape = CASES[case]
    if shape == "line" and cfg.bc != "dirichlet":
        raise UsageError("the quadratic case needs --bc dirichlet")
    _condition(cfg, cloud)
    src, exact = manufactured_problem(shape, case, cloud)
    if cfg.bc == "dirichlet":
        condition = dirichlet(exact)
    elif cfg.bc == "neumann":
        if (shape, case) not in NEUMANN_DATA:
            raise UsageError(f"no Neumann data for the {case} case")
        condition = neumann(NEUMANN_DATA[(shape, case)])
    else:
        condition = None
    disc = _discretize(cfg, cloud, condition)
    A, b, ids = disc.reduced_system(src)
    if disc.closed or cfg.bc == "neumann":
        # constants span the null space; Neumann right-hand sides are compatible
        # with respect to the nonsymmetric left null vector, so no projection
        reg = rank_deficiency_fix(A, b, mode=cfg.nullspace, project=disc.closed)
        x, rep = solve(reg.matrix, reg.rhs, cfg.solver, cfg.tol)
        u = align_mean(reg.solution(x), exact[ids])
    else:
        x, rep = solve(A, b, cfg.solver, cfg.tol)
        u = x
    full = disc.expand(u, ids)
    err = np.abs(u - exact[ids])
    errors = {"Linf": float(err.max()), "L2": float(np.sqrt(np.mean(err**2)))}
    return disc, rep, errors, full, case


def cmd_sample(cfg: RunConfig) -> dict:
    cloud = load_cloud(cfg)
    man = _base_manifest(cfg, cloud)
    nn, _ = cloud.tree.query(cloud.points, k=2)
    man["spacing"] = {"min": float(nn[:, 1].min()), "mean": float(nn[:, 1].mean()),
                      "max": float(nn[:, 1].max())}
    if cfg.shape:
        man["max_distance_to_manifold"] = float(distance_to_manifold(cfg.shape, cloud.points).max())
    if cfg.save:
        _write_cloud(cfg.save, cloud)
        man["saved"] = cfg.save
    return man


def cmd_solve(cfg: RunConfig) -> dict:
    cloud = load_cloud(cfg)
    disc, rep, errors, full, case = _solve_once(cfg, cloud)
    man = _base_manifest(replace(cfg, case=case), cloud, disc)
    man["solver"] = rep.as_dict()
    man["iterations"] = int(rep.iterations)
    man["residual"] = float(rep.final_residual)
    man["errors"] = errors
    if cfg.save:
        _write_cloud(cfg.save, cloud, full)
        man["saved"] = cfg.save
    return man


def _order_fit(sizes, errors, by_dx, m):
    x, y = np.log(np.asarray(sizes, float)), np.log(np.asarray(errors, float))
    slope = float(np.polyfit(x, y, 1)[0])
    local = [None] + [float((y[i] - y[i - 1]) / (x[i] - x[i - 1])) for i in range(1, len(x))]
    # spacing ~ dx, or ~ n^(-1/m)
    conv = (lambda s: s) if by_dx else (lambda s: -m * s)
    return slope, conv(slope), [None if s is None else conv(s) for s in local]


def cmd_convergence(cfg: RunConfig) -> dict:
    if not cfg.sizes or len(cfg.sizes) < 3:
        raise UsageError("convergence needs --sizes with at least 3 values")
    if cfg.path:
        raise UsageError("convergence samples its own clouds; --in is not allowed")
    by_dx = cfg.mode == "gbpm"
    runs, errs = [], []
    last = None
    for s in cfg.sizes:
        c = replace(cfg, dx=float(s), n=None) if by_dx else replace(cfg, n=int(s), dx=None)
        cloud = load_cloud(c)
        disc, rep, errors, _, case = _solve_once(c, cloud)
        errs.append(errors["Linf"])
        runs.append({"size": s, "n": int(cloud.n), "errors": errors, "solver": rep.as_dict(),
                     "h_stats": _stats(disc)})
        last = (cloud, disc, case)
    cloud, disc, case = last
    slope, order, local = _order_fit(cfg.sizes, errs, by_dx, cloud.manifold_dim)
    man = _base_manifest(replace(cfg, case=case), cloud, disc)
    man["sampler"]["sizes"] = list(cfg.sizes)
    man["errors"] = runs[-1]["errors"]
    man["convergence"] = {"axis": "dx" if by_dx else "n", "runs": runs, "slope": slope,
                          "order": order}
    if cfg.csv:
        _write_csv(cfg.csv, ["n_or_dx", "error", "order_estimate"],
                   [(s, repr(float(e)), "" if o is None else repr(o))
                    for s, e, o in zip(cfg.sizes, errs, local)])
    return man


def _clusters(cfg, cloud):
    shape = cfg.shape
    if shape not in ("sphere", "circle", "hemisphere", "line") or cloud.n == 0:
        if cfg.harmonics:
            raise UsageError(f"no exact spectrum for {shape or 'file'} clouds")
        return [], 0
    harm = list(cfg.harmonics) if cfg.harmonics else DEFAULT_HARMONICS.get(shape, [5])
    try:
        clusters = [(h, *exact_eigenvalue(shape, h, cfg.bc)) for h in harm]
        need = eigen_count(shape, max(harm), cfg.bc)
    except SamplerError as exc:
        raise UsageError(str(exc)) from None
    return clusters, need


def cmd_eig(cfg: RunConfig) -> dict:
    cloud = load_cloud(cfg)
    condition = _condition(cfg, cloud)
    clusters, need = _clusters(cfg, cloud)
    disc = _discretize(cfg, cloud, condition)
    A, ids = disc.eigen_matrix()
    k = cfg.eigs if cfg.eigs is not None else max(need + 10, 10)
    if cfg.eigs is not None and cfg.eigs < need:
        raise UsageError(f"--eigs {cfg.eigs} is too small for the requested harmonics (need {need})")
    if k >= A.shape[0]:
        raise UsageError(f"--eigs must be below the number of unknowns ({A.shape[0]})")
    res = smallest_eigs(A, k)
    man = _base_manifest(cfg, cloud, disc)
    errs = cluster_errors(res.values, [(h, lam, mult) for h, lam, mult in clusters])
    man["eigen"] = {
        "k": int(k),
        "values": [float(v) for v in res.real],
        "imag": [float(v) for v in res.values.imag],
        "clusters": errs,
        "E2": {str(e["n"]): e["E2"] for e in errs},
        "Einf": {str(e["n"]): e["Einf"] for e in errs},
        "complex_pairs": {"count": int(res.complex_pairs), "max_rel_imag": float(res.max_rel_imag)},
        "shift": float(res.shift),
    }
    if cfg.save:
        for j in range(k):
            _write_cloud(f"{cfg.save}_{j:03d}.txt", cloud, disc.expand(res.vectors[:, j], ids))
        man["saved"] = f"{cfg.save}_*.txt"
    return man


def cmd_spectrum(cfg: RunConfig) -> dict:
    cloud = load_cloud(cfg)
    if cfg.spectrum_mode == "full" and cloud.n > FULL_SPECTRUM_LIMIT:
        raise UsageError(f"full spectrum is limited to n <= {FULL_SPECTRUM_LIMIT} (cloud has "
                         f"{cloud.n} points); use --spectrum-mode radius")
    condition = _condition(cfg, cloud)
    man = _base_manifest(cfg, cloud)
    man["problem"] = {"weights": cfg.weights or "default", "bc": cfg.bc,
                      "mode": cfg.spectrum_mode}
    results, rows = {}, []
    for method in ("mvgd", "mls"):
        disc = _discretize(cfg, cloud, condition, method)
        A, _, _ = disc.reduced_system()
        if disc.closed:
            A = rank_deficiency_fix(A, np.zeros(A.shape[0])).matrix
        entry = {"m_matrix_fraction": float(row_diagnostics(disc.operator).m_fraction),
                 "k": int(disc.k), "h_stats": _stats(disc)}
        if cfg.spectrum_mode == "full":
            ev = splitting_spectrum(A, "full")
            ev = ev[np.lexsort((ev.imag, ev.real))]
            entry["radius"] = float(np.abs(ev).max())
            entry["count_above_one"] = int(np.sum(np.abs(ev) > 1))
            rows += [(method, repr(float(v.real)), repr(float(v.imag))) for v in ev]
        else:
            entry["radius"] = float(splitting_spectrum(A, "radius"))
        entry["gauss_seidel_converges"] = entry["radius"] < 1
        results[method] = entry
    man["spectrum"] = results
    if cfg.csv:
        if cfg.spectrum_mode == "full":
            _write_csv(cfg.csv, ["method", "real", "imag"], rows)
        else:
            _write_csv(cfg.csv, ["method", "radius"],
                       [(m, repr(r["radius"])) for m, r in results.items()])
    return man


COMMANDS = {"sample": cmd_sample, "solve": cmd_solve, "convergence": cmd_convergence,
            "eig": cmd_eig, "spectrum": cmd_spectrum}


def _write_cloud(path, cloud, values=None):
    try:
        write_cloud(path, cloud, values)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def _emit(manifest, out):
    text = json.dumps(manifest, sort_keys=True, indent=2, allow_nan=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = make_config(args)
        manifest = COMMANDS[cfg.command](cfg)
        _emit(manifest, cfg.out)
        return EXIT_OK
    except UsageError as exc:
        print(f"pointlb: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"pointlb: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, EigenError, GeometryError, AssemblyError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"pointlb: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
