"""Sparse linear solvers and the Gauss-Seidel splitting diagnostic.

All iterative solvers report ``||A x - b|| / ||b||`` (or ``||A x - b||`` when
``b = 0``) and return ``(x, SolveReport)``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SolveReport",
    "SolverError",
    "DivergenceError",
    "NoConvergenceError",
    "RegularizedSystem",
    "SOLVERS",
    "FULL_SPECTRUM_LIMIT",
    "gauss_seidel",
    "splitting",
    "splitting_spectrum",
    "gmres",
    "amg_solve",
    "direct_solve",
    "solve",
    "rank_deficiency_fix",
    "align_mean",
]

SOLVERS = ("amg", "gmres", "gs", "direct")
FULL_SPECTRUM_LIMIT = 4000
DIVERGENCE_FACTOR = 1e6


class SolverError(RuntimeError):
    """A linear solve could not be carried out."""


class DivergenceError(SolverError):
    """The residual grew by more than ``DIVERGENCE_FACTOR``."""


class NoConvergenceError(SolverError):
    """Iteration limit reached; ``x`` holds the best iterate."""

    def __init__(self, msg, x=None, report=None):
        super().__init__(msg)
        self.x = x
        self.report = report


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    wall_time: float
    method: str
    history: list = field(default_factory=list, repr=False)
    levels: int | None = None

    def as_dict(self) -> dict:
        d = {"method": self.method, "iterations": int(self.iterations),
             "residual": float(self.final_residual), "wall_time": float(self.wall_time)}
        if self.levels is not None:
            d["levels"] = int(self.levels)
        return d


def _prepare(A, b, x0):
    A = sp.csr_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise SolverError(f"matrix must be square, got {A.shape}")
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != A.shape[0]:
        raise SolverError(f"rhs has length {b.shape[0]}, matrix has {A.shape[0]} rows")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    return A, b, x


def _relres(A, x, b, bnorm):
    r = np.linalg.norm(b - A @ x)
    return r / bnorm if bnorm > 0 else r


def _check_diagonal(A):
    d = A.diagonal()
    bad = np.flatnonzero(d == 0)
    if len(bad):
        raise SolverError(f"zero diagonal in {len(bad)} row(s), first at {bad[0]}")
    return d


def gauss_seidel(A, b, x0=None, tol: float = 1e-8, max_iter: int = 10000):
    """Forward Gauss-Seidel, ``x <- M^{-1}(b - N x)`` with ``M = tril(A)``.

    Raises
    ------
    SolverError
        Zero diagonal entry.
    DivergenceError
        Residual exceeds ``DIVERGENCE_FACTOR`` times the initial one.
    NoConvergenceError
        ``max_iter`` sweeps without reaching ``tol``.
    """
    from pyamg.relaxation.relaxation import gauss_seidel as gs_sweep

    t0 = time.perf_counter()
    A, b, x = _prepare(A, b, x0)
    _check_diagonal(A)
    A.sort_indices()
    bnorm = np.linalg.norm(b)
    r0 = _relres(A, x, b, bnorm)
    hist = [r0]
    it = 0
    while hist[-1] > tol:
        if it >= max_iter:
            rep = SolveReport(it, hist[-1], time.perf_counter() - t0, "gs", hist)
            raise NoConvergenceError(f"Gauss-Seidel: residual {hist[-1]:.3e} after {it} sweeps", x, rep)
        gs_sweep(A, x, b, iterations=1, sweep="forward")
        it += 1
        res = _relres(A, x, b, bnorm)
        hist.append(res)
        if not np.isfinite(res) or res > DIVERGENCE_FACTOR * max(r0, np.finfo(float).tiny):
            raise DivergenceError(f"Gauss-Seidel diverged: residual grew {res / r0:.3e}x in {it} sweeps")
    return x, SolveReport(it, hist[-1], time.perf_counter() - t0, "gs", hist)


def splitting(A):
    """Gauss-Seidel splitting ``A = M + N`` (lower with diagonal, strict upper)."""
    A = sp.csr_matrix(A, dtype=float)
    return sp.tril(A, format="csr"), sp.triu(A, k=1, format="csr")


def splitting_spectrum(A, mode: str = "full", tol: float = 1e-8, seed: int = 0):
    """Eigenvalues (``mode="full"``) or spectral radius (``"radius"``) of ``M^{-1} N``.

    Full mode builds the dense iteration matrix and is limited to
    ``FULL_SPECTRUM_LIMIT`` unknowns. Radius mode runs Arnoldi on
    ``v -> M^{-1} N v`` and falls back to power iteration.
    """
    A = sp.csr_matrix(A, dtype=float)
    n = A.shape[0]
    _check_diagonal(A)
    M, N = splitting(A)
    if mode not in ("full", "radius"):
        raise ValueError(f"mode must be 'full' or 'radius', got {mode!r}")
    if mode == "full" and n > FULL_SPECTRUM_LIMIT:
        raise ValueError(f"full spectrum needs n <= {FULL_SPECTRUM_LIMIT} (got {n}); use radius mode")
    if N.nnz == 0:
        # lower triangular: Gauss-Seidel is exact in one sweep
        return np.zeros(n, dtype=complex) if mode == "full" else 0.0
    if mode == "full":
        T = sla.solve_triangular(M.toarray(), N.toarray(), lower=True, check_finite=False)
        return np.linalg.eigvals(T)

    def apply(v):
        return spla.spsolve_triangular(M, N @ v, lower=True)

    if n <= 2:
        return float(np.max(np.abs(splitting_spectrum(A, "full"))))
    op = spla.LinearOperator((n, n), matvec=apply, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        vals = spla.eigs(op, k=1, which="LM", v0=v0, tol=tol, maxiter=20 * n,
                         return_eigenvectors=False)
        return float(np.max(np.abs(vals)))
    except spla.ArpackNoConvergence:
        return _power_radius(apply, v0, tol)


def _power_radius(apply, v, tol, max_iter=100000):
    # ratio of successive norms; averages over the period of rotating dominant pairs
    v = v / np.linalg.norm(v)
    prev = 0.0
    logs = []
    for _ in range(max_iter):
        w = apply(v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        logs.append(np.log(nw))
        v = w / nw
        if len(logs) >= 50:
            est = float(np.exp(np.mean(logs[-50:])))
            if abs(est - prev) <= tol * est:
                return est
            prev = est
    return float(np.exp(np.mean(logs[-50:])))


def gmres(A, b, x0=None, tol: float = 1e-8, restart: int | None = None, max_iter: int = 5000):
    """Restarted GMRES with left Jacobi scaling; ``tol`` applies to the true residual.

    ``restart`` defaults to ``min(n, 500)``, i.e. full GMRES on small
    systems. Curve systems have condition numbers growing like ``n**2`` and
    can stagnate under short restarts; prefer AMG there.
    Rows with a zero diagonal (bordered systems) are left unscaled.
    """
    t0 = time.perf_counter()
    A, b, x = _prepare(A, b, x0)
    bnorm = np.linalg.norm(b)
    res = _relres(A, x, b, bnorm)
    if res <= tol:
        return x, SolveReport(0, res, time.perf_counter() - t0, "gmres", [res])
    restart = min(A.shape[0], 500) if restart is None else restart
    d = A.diagonal()
    Dinv = sp.diags(1.0 / np.where(d != 0, d, 1.0))
    As, bs = (Dinv @ A).tocsr(), Dinv @ b
    hist = [res]
    count = [0]

    def cb(_):
        count[0] += 1

    inner_tol = tol
    for _ in range(4):
        x, _info = spla.gmres(As, bs, x0=x, rtol=inner_tol, atol=0.0, restart=restart,
                              maxiter=max(1, max_iter // restart), callback=cb,
                              callback_type="pr_norm")
        res = _relres(A, x, b, bnorm)
        hist.append(res)
        if res <= tol or count[0] >= max_iter:
            break
        # scaled and true residuals differ; tighten and continue from x
        inner_tol *= 0.1
    rep = SolveReport(count[0], res, time.perf_counter() - t0, "gmres", hist)
    if res > tol:
        raise NoConvergenceError(f"GMRES: residual {res:.3e} after {count[0]} iterations", x, rep)
    return x, rep


def _amg_hierarchy(A, theta, max_coarse):
    import pyamg

    ml = pyamg.ruge_stuben_solver(
        A, strength=("classical", {"theta": theta}), interpolation="direct",
        presmoother=("gauss_seidel", {"sweep": "symmetric", "iterations": 2}),
        postsmoother=("gauss_seidel", {"sweep": "symmetric", "iterations": 2}),
        max_coarse=max_coarse, max_levels=30, coarse_solver="splu", keep=False)
    return ml


def amg_solve(A, b, x0=None, tol: float = 1e-8, max_cycles: int = 200, theta: float = 0.25,
              max_coarse: int = 50, accel: str | None = "fgmres"):
    """Classical Ruge-Stuben algebraic multigrid.

    Strength of connection uses threshold ``theta``, interpolation is
    direct, smoothing is two symmetric Gauss-Seidel sweeps before and after
    the coarse correction, and the coarsest level (at
    most ``max_coarse`` unknowns) is factored directly.

    With ``accel="fgmres"`` (default) each V-cycle right-preconditions a
    flexible GMRES step, so the monitored residual is the true one; surface
    stencils are not M-matrices and stationary cycling can diverge on them. ``accel=None`` runs plain V-cycles. If the hierarchy
    cannot be built, or does not coarsen, GMRES is used with a warning.
    ``iterations`` counts V-cycles.
    """
    t0 = time.perf_counter()
    A, b, x = _prepare(A, b, x0)
    bnorm = np.linalg.norm(b)
    res = _relres(A, x, b, bnorm)
    if bnorm == 0 and not np.any(x):
        return x, SolveReport(0, 0.0, time.perf_counter() - t0, "amg", [0.0])
    if res <= tol:
        return x, SolveReport(0, res, time.perf_counter() - t0, "amg", [res])
    try:
        ml = _amg_hierarchy(A, theta, max_coarse)
        if len(ml.levels) == 1 and A.shape[0] > max_coarse:
            raise SolverError("no coarsening progress")
    except Exception as exc:  # noqa: BLE001 - any setup failure falls back
        warnings.warn(f"AMG setup failed ({exc}); falling back to GMRES", RuntimeWarning, stacklevel=2)
        return gmres(A, b, x, tol)
    hist = [res]
    it = 0
    if accel is None:
        x = x.copy()
        while hist[-1] > tol and it < max_cycles:
            x = ml.solve(b, x0=x, tol=0.0, maxiter=1, cycle="V")
            it += 1
            hist.append(_relres(A, x, b, bnorm))
            if not np.isfinite(hist[-1]) or hist[-1] > DIVERGENCE_FACTOR * hist[0]:
                raise DivergenceError(f"AMG diverged after {it} V-cycles")
    else:
        inner_tol = tol
        for _ in range(4):
            inner = []
            x = ml.solve(b, x0=x, tol=inner_tol, maxiter=min(max_cycles - it, A.shape[0]), cycle="V",
                         accel=accel, residuals=inner)
            it += max(len(inner) - 1, 0)
            hist.append(_relres(A, x, b, bnorm))
            if hist[-1] <= tol or it >= max_cycles:
                break
            inner_tol *= 0.1
    rep = SolveReport(it, hist[-1], time.perf_counter() - t0, "amg", hist, len(ml.levels))
    if not hist[-1] <= tol:
        raise NoConvergenceError(f"AMG: residual {hist[-1]:.3e} after {it} V-cycles", x, rep)
    return x, rep


def direct_solve(A, b):
    """Sparse LU solve."""
    t0 = time.perf_counter()
    A, b, _ = _prepare(A, b, None)
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A.tocsc(), b)
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise SolverError(f"direct solve failed: {exc}") from None
    res = _relres(A, x, b, np.linalg.norm(b))
    if not np.isfinite(res):
        raise SolverError("direct solve produced non-finite values")
    return x, SolveReport(1, res, time.perf_counter() - t0, "direct", [res])


def solve(A, b, method: str = "amg", tol: float = 1e-8, x0=None, **kwargs):
    """Dispatch to one of ``SOLVERS``."""
    if method == "amg":
        return amg_solve(A, b, x0, tol, **kwargs)
    if method == "gmres":
        return gmres(A, b, x0, tol, **kwargs)
    if method == "gs":
        return gauss_seidel(A, b, x0, tol, **kwargs)
    if method == "direct":
        return direct_solve(A, b)
    raise ValueError(f"solver must be one of {SOLVERS}, got {method!r}")


@dataclass(frozen=True, eq=False)
class RegularizedSystem:
    """Nonsingular stand-in for a closed-manifold system.

    ``mode="pin"`` replaces row ``pin`` with the identity and sets that
    unknown to zero; ``mode="lagrange"`` borders the matrix with a row and a
    column of ones enforcing zero mean. ``solution`` maps a solve of
    ``(matrix, rhs)`` back to ``n`` mean-zero values.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    n: int
    mode: str
    incompatibility: float

    def solution(self, x) -> np.ndarray:
        u = np.asarray(x, dtype=float)[: self.n]
        return u - u.mean()


def rank_deficiency_fix(A, b, mode: str = "pin", pin: int = 0, warn_tol: float = 1e-3,
                        project: bool = True) -> RegularizedSystem:
    """Make a closed-manifold system (rows summing to zero) uniquely solvable.

    The right-hand side is projected onto the complement of the constants. A
    warning reports the removed component when it exceeds ``warn_tol``
    relative to ``||b||``.

    The projection is exact for symmetric operators. A nonsymmetric
    operator is compatible with ``b`` when ``b`` is orthogonal to its left
    null vector, which is not the constant; pure Neumann systems are one
    such case. Pass ``project=False`` when ``b`` is already compatible
    (for instance ``b = A @ u``): the pinned row or the Lagrange multiplier
    then absorbs any remaining constant component.
    """
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[0]
    mean = float(b.mean()) if n and project else 0.0
    removed = abs(mean) * np.sqrt(n)
    bnorm = np.linalg.norm(b)
    if removed > warn_tol * bnorm:
        warnings.warn(f"incompatible right-hand side: removed constant component of norm {removed:.3e}",
                      RuntimeWarning, stacklevel=2)
    bp = b - mean
    if mode == "pin":
        keep = np.ones(n)
        keep[pin] = 0.0
        M = sp.diags(keep) @ A
        M = (M + sp.csr_matrix(([1.0], ([pin], [pin])), shape=(n, n))).tocsr()
        M.eliminate_zeros()
        bp = bp.copy()
        bp[pin] = 0.0
        return RegularizedSystem(M, bp, n, mode, removed)
    if mode == "lagrange":
        ones = np.ones((n, 1))
        M = sp.bmat([[A, sp.csr_matrix(ones)], [sp.csr_matrix(ones.T), None]], format="csr")
        return RegularizedSystem(M, np.append(bp, 0.0), n, mode, removed)
    raise ValueError(f"mode must be 'pin' or 'lagrange', got {mode!r}")


def align_mean(u, exact) -> np.ndarray:
    """Shift ``u`` so its mean matches that of ``exact``."""
    u = np.asarray(u, dtype=float)
    return u - u.mean() + np.mean(exact)
