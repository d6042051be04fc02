"""Per-point virtual-grid stencils and assembly of the discrete operator.

A stencil row holds weights for ``U`` at the center point and its
neighbors (center first) such that ``row @ U`` approximates the
Laplace-Beltrami operator at the center. Three variants are built:

``mvgd``
    Centered differences on a virtual grid of spacing ``h`` applied to the
    local least-squares fit of ``U``; the fitted value at the center node is
    replaced by the sampled value ``U_i``.
``mvgd-div``
    Curves only: the same grid with the conservative (divergence) form.
``mls``
    Plain least squares: derivatives of the fitted quadratic at the origin.

:func:`assemble` flips the sign, so assembled matrices represent
``-Laplace-Beltrami`` and have nonnegative spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import DegenerateNeighborhoodError, LocalFrame, local_frames
from .localfit import (
    FunctionFitOperator,
    SurfaceFit,
    fit_operators,
    lb_coefficient_array,
    monomials,
)

__all__ = [
    "StencilRow",
    "StencilSet",
    "AssemblyError",
    "RowDiagnostics",
    "METHODS",
    "default_weights",
    "virtual_h",
    "mvgd_derivatives_1d",
    "mls_derivatives_1d",
    "mvgd_row_1d",
    "mvgd_row_2d",
    "mls_row",
    "one_sided_1d",
    "build_rows",
    "assemble",
    "row_report",
    "row_diagnostics",
    "regular_line_mvgd",
    "regular_line_mls",
]

METHODS = ("mvgd", "mls", "mvgd-div")
_SIGN_RTOL = 1e-12


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StencilRow:
    """One row of the (positive-sign) Laplace-Beltrami discretization."""

    center: int
    ids: np.ndarray
    coeffs: np.ndarray
    h: float = float("nan")

    def apply(self, values) -> float:
        return float(self.coeffs @ np.asarray(values, dtype=float)[self.ids])


@dataclass(frozen=True, eq=False)
class StencilSet:
    """Stencil rows for many points, stored as dense (n, K+1) arrays."""

    centers: np.ndarray
    ids: np.ndarray
    coeffs: np.ndarray
    h: np.ndarray
    linear_fallback: np.ndarray
    extrapolated: np.ndarray

    def __len__(self):
        return len(self.centers)

    def row(self, r: int) -> StencilRow:
        return StencilRow(int(self.centers[r]), self.ids[r], self.coeffs[r], float(self.h[r]))

    def __iter__(self):
        return (self.row(r) for r in range(len(self)))

    def apply(self, values) -> np.ndarray:
        """Discrete Laplace-Beltrami of ``values`` at every center."""
        return np.einsum("nk,nk->n", self.coeffs, np.asarray(values, dtype=float)[self.ids])


def virtual_h(local_coords, m: int | None = None) -> float:
    """Virtual grid spacing: a quarter of the tangent extent of the neighborhood.

    For surfaces the smaller of the two tangent directions is used.
    """
    lc = np.asarray(local_coords, dtype=float)
    if lc.ndim == 1:
        lc = lc[:, None]
    m = lc.shape[1] if m is None else m
    h = _virtual_h(lc[None, :, :m])[0]
    if not h > 0:
        raise DegenerateNeighborhoodError("neighborhood has zero extent in a tangent direction")
    return float(h)


def _virtual_h(tc):
    extent = tc.max(axis=1) - tc.min(axis=1)
    return extent.min(axis=-1) / 4.0


def _grid_nodes(m):
    """Virtual-grid offsets (in units of h) used by the centered stencils."""
    if m == 1:
        return np.array([[1.0], [-1.0]])
    return np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], float)


def _evaluate(W, nodes):
    """Weights giving the fitted value at each node: (n, q, K+1)."""
    return np.einsum("nqj,njk->nqk", monomials(nodes), W)


def _count_extrapolated(tc, h):
    m = tc.shape[-1]
    nodes = _grid_nodes(m)[None] * h[:, None, None]
    lo, hi = tc.min(axis=1), tc.max(axis=1)
    eps = 1e-12 * np.maximum(np.abs(lo), np.abs(hi))
    outside = (nodes < (lo - eps)[:, None, :]) | (nodes > (hi + eps)[:, None, :])
    return outside.any(axis=-1).sum(axis=-1)


def _rows_1d(W, a, h, method):
    n, _, npts = W.shape
    e0 = np.zeros(npts)
    e0[0] = 1.0
    coef = lb_coefficient_array(a, 1)
    if method == "mls":
        return coef[:, :1] * W[:, 1] + coef[:, 1:] * 2 * W[:, 2]
    nodes = np.stack([h, -h], axis=1)[:, :, None]
    E = _evaluate(W, nodes)
    up, um = E[:, 0], E[:, 1]
    hh = h[:, None]
    if method == "mvgd":
        d1 = (up - um) / (2 * hh)
        d2 = (up - 2 * e0 + um) / hh**2
        return coef[:, :1] * d1 + coef[:, 1:] * d2
    if method == "mvgd-div":
        slope_p = a[:, 1] + a[:, 2] * h
        slope_m = a[:, 1] - a[:, 2] * h
        sp_ = (1 / np.sqrt(1 + slope_p**2))[:, None]
        sm_ = (1 / np.sqrt(1 + slope_m**2))[:, None]
        s0 = np.sqrt(1 + a[:, 1] ** 2)[:, None]
        return (sp_ * up - (sp_ + sm_) * e0 + sm_ * um) / (hh**2 * s0)
    raise ValueError(f"unknown method {method!r}")


def _rows_2d(W, a, h, method):
    n, _, npts = W.shape
    e0 = np.zeros(npts)
    e0[0] = 1.0
    A = lb_coefficient_array(a, 2)
    if method == "mls":
        d = [W[:, 1], W[:, 2], 2 * W[:, 3], W[:, 4], 2 * W[:, 5]]
    elif method == "mvgd":
        nodes = _grid_nodes(2)[None] * h[:, None, None]
        E = _evaluate(W, nodes)
        hh = h[:, None]
        d = [
            (E[:, 0] - E[:, 1]) / (2 * hh),
            (E[:, 2] - E[:, 3]) / (2 * hh),
            (E[:, 0] - 2 * e0 + E[:, 1]) / hh**2,
            (E[:, 4] - E[:, 5] - E[:, 6] + E[:, 7]) / (4 * hh**2),
            (E[:, 2] - 2 * e0 + E[:, 3]) / hh**2,
        ]
    else:
        raise ValueError(f"method {method!r} is not available on surfaces")
    return sum(A[:, l, None] * d[l] for l in range(5))


def default_weights(method: str) -> str:
    """Unit weights for the virtual-grid methods, center-heavy weights for plain MLS."""
    return "center" if method == "mls" else "unit"


def build_rows(points, centers, neighbor_ids, method: str = "mvgd", weights=None,
               manifold_dim: int | None = None) -> StencilSet:
    """Stencil rows for every center from its neighbors.

    ``points`` may be an extended array (for instance including ghost
    points); ``centers`` and ``neighbor_ids`` index into it. ``weights``
    defaults to :func:`default_weights` of the method.
    """
    points = np.asarray(points, dtype=float)
    centers = np.asarray(centers, dtype=int)
    neighbor_ids = np.asarray(neighbor_ids, dtype=int)
    m = points.shape[1] - 1 if manifold_dim is None else manifold_dim
    _, coords = local_frames(points, centers, neighbor_ids, m)
    tc, z = coords[..., :m], coords[..., m]
    W, fallback = fit_operators(tc, default_weights(method) if weights is None else weights)
    a = np.einsum("nik,nk->ni", W, z)
    h = _virtual_h(tc)
    if not np.all(h > 0):
        raise DegenerateNeighborhoodError("neighborhood has zero extent in a tangent direction")
    rows = _rows_1d(W, a, h, method) if m == 1 else _rows_2d(W, a, h, method)
    ids = np.concatenate([centers[:, None], neighbor_ids], axis=1)
    extrap = _count_extrapolated(tc, h) if method != "mls" else np.zeros(len(centers), int)
    return StencilSet(centers, ids, rows, h, fallback, extrap)


def _as_batch(W, fit, h):
    Wm = W.weights if isinstance(W, FunctionFitOperator) else np.asarray(W, dtype=float)
    a = fit.a if isinstance(fit, SurfaceFit) else np.asarray(fit, dtype=float)
    return Wm[None], a[None], np.array([float(h)])


def mvgd_derivatives_1d(W, h: float):
    """Weights of the modified centered differences for ``U_x`` and ``U_xx``.

    Returns ``(d1, d2)``, each over the stacked samples (center first).
    """
    Wm = W.weights if isinstance(W, FunctionFitOperator) else np.asarray(W, dtype=float)
    e0 = np.zeros(Wm.shape[1])
    e0[0] = 1.0
    up = monomials(np.array([h])) @ Wm
    um = monomials(np.array([-h])) @ Wm
    return (up - um) / (2 * h), (up - 2 * e0 + um) / h**2


def mls_derivatives_1d(W):
    """Weights of ``U_x`` and ``U_xx`` taken from the fitted quadratic at 0."""
    Wm = W.weights if isinstance(W, FunctionFitOperator) else np.asarray(W, dtype=float)
    return Wm[1].copy(), 2 * Wm[2]


def one_sided_1d(W, h: float, direction: str = "forward") -> np.ndarray:
    """Modified one-sided differences ``(U(h) - U_i)/h`` or ``(U_i - U(-h))/h``."""
    Wm = W.weights if isinstance(W, FunctionFitOperator) else np.asarray(W, dtype=float)
    e0 = np.zeros(Wm.shape[1])
    e0[0] = 1.0
    if direction == "forward":
        return (monomials(np.array([h])) @ Wm - e0) / h
    if direction == "backward":
        return (e0 - monomials(np.array([-h])) @ Wm) / h
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def _row_from(frame, coeffs, h):
    ids = frame.ids if isinstance(frame, LocalFrame) else np.asarray(frame, dtype=int)
    return StencilRow(int(ids[0]), ids, coeffs, float(h))


def mvgd_row_1d(frame, fit, W, h: float, form: str = "nondivergence") -> StencilRow:
    """Curve stencil at one point; ``form`` is ``"nondivergence"`` or ``"divergence"``."""
    method = {"nondivergence": "mvgd", "nondiv": "mvgd", "divergence": "mvgd-div", "div": "mvgd-div"}[form]
    Wb, ab, hb = _as_batch(W, fit, h)
    return _row_from(frame, _rows_1d(Wb, ab, hb, method)[0], h)


def mvgd_row_2d(frame, fit, W, h: float) -> StencilRow:
    Wb, ab, hb = _as_batch(W, fit, h)
    return _row_from(frame, _rows_2d(Wb, ab, hb, "mvgd")[0], h)


def mls_row(frame, fit, W) -> StencilRow:
    Wb, ab, hb = _as_batch(W, fit, np.nan)
    rows = _rows_1d(Wb, ab, hb, "mls") if Wb.shape[1] == 3 else _rows_2d(Wb, ab, hb, "mls")
    return _row_from(frame, rows[0], np.nan)


def assemble(n: int, rows, identity_rows=(), n_cols: int | None = None) -> sp.csr_matrix:
    """Assemble stencil rows into a CSR matrix of ``-Laplace-Beltrami``.

    Parameters
    ----------
    n : int
        Number of rows. Every row must be covered exactly once, either by a
        stencil row (whose ``center`` is the row index) or by ``identity_rows``.
    rows : StencilSet or iterable of StencilRow
    identity_rows : array_like of int
        Rows replaced by the identity (Dirichlet points).
    n_cols : int, optional
        Column count when stencils reference extra (ghost) unknowns.
    """
    n_cols = n if n_cols is None else n_cols
    if isinstance(rows, StencilSet):
        centers, ids, coeffs = rows.centers, rows.ids, rows.coeffs
    else:
        rows = list(rows)
        centers = np.array([r.center for r in rows], dtype=int)
        ids = [np.asarray(r.ids, dtype=int) for r in rows]
        coeffs = [np.asarray(r.coeffs, dtype=float) for r in rows]
    identity_rows = np.asarray(identity_rows, dtype=int).reshape(-1)
    covered = np.concatenate([centers, identity_rows])
    counts = np.bincount(covered, minlength=n) if len(covered) else np.zeros(n, int)
    if len(counts) > n or np.any(counts > 1):
        raise AssemblyError("duplicate or out-of-range row in assembly")
    if np.any(counts == 0):
        raise AssemblyError(f"{int(np.sum(counts == 0))} row(s) have no stencil")
    if isinstance(ids, np.ndarray):
        r_idx = np.repeat(centers, ids.shape[1])
        c_idx = ids.ravel()
        vals = -coeffs.ravel()
    else:
        r_idx = np.concatenate([np.full(len(i), c) for i, c in zip(ids, centers)]) if ids else np.zeros(0, int)
        c_idx = np.concatenate(ids) if ids else np.zeros(0, int)
        vals = -np.concatenate(coeffs) if coeffs else np.zeros(0)
    r_idx = np.concatenate([r_idx, identity_rows])
    c_idx = np.concatenate([c_idx, identity_rows])
    vals = np.concatenate([vals, np.ones(len(identity_rows))])
    A = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(n, n_cols))
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class RowDiagnostics:
    """Per-row sign and dominance report of an assembled operator."""

    row_sum: np.ndarray
    diagonal: np.ndarray
    dominance: np.ndarray
    sign_ok: np.ndarray
    m_matrix: np.ndarray

    @property
    def m_fraction(self) -> float:
        return float(np.mean(self.m_matrix)) if len(self.m_matrix) else 1.0


def row_report(coeffs, diag_index: int = 0) -> dict:
    """Sign pattern and dominance of a single row.

    A row passes as an M-matrix row when every off-diagonal entry has sign
    opposite to (or is zero relative to) the diagonal and
    ``sum |off| <= |diag|``, both up to a 1e-12 relative tolerance.
    """
    c = np.asarray(coeffs, dtype=float)
    diag = c[diag_index]
    off = np.delete(c, diag_index)
    scale = np.max(np.abs(c)) if c.size else 0.0
    tol = _SIGN_RTOL * scale
    sign_ok = bool(diag != 0 and np.all(off * np.sign(diag) <= tol))
    dom = float(np.sum(np.abs(off)) / abs(diag)) if diag != 0 else np.inf
    return {
        "row_sum": float(c.sum()),
        "diagonal": float(diag),
        "dominance": dom,
        "sign_ok": sign_ok,
        "m_matrix": bool(sign_ok and dom <= 1 + _SIGN_RTOL * max(1.0, len(off))),
    }


def row_diagnostics(op) -> RowDiagnostics:
    """Row sums, diagonal, dominance ratio and M-matrix flags for every row."""
    A = sp.csr_matrix(op)
    n = A.shape[0]
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    is_diag = A.indices == rows
    diag = np.zeros(n)
    np.add.at(diag, rows[is_diag], A.data[is_diag])
    absrow_max = np.zeros(n)
    np.maximum.at(absrow_max, rows, np.abs(A.data))
    off = ~is_diag
    off_abs = np.bincount(rows[off], weights=np.abs(A.data[off]), minlength=n)
    signed = A.data[off] * np.sign(diag[rows[off]])
    worst = np.full(n, -np.inf)
    np.maximum.at(worst, rows[off], signed)
    row_sum = np.asarray(A.sum(axis=1)).ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        dom = np.where(diag != 0, off_abs / np.abs(diag), np.inf)
    nnz_row = np.diff(A.indptr)
    sign_ok = (diag != 0) & (worst <= _SIGN_RTOL * absrow_max)
    m_ok = sign_ok & (dom <= 1 + _SIGN_RTOL * np.maximum(1, nnz_row))
    return RowDiagnostics(row_sum, diag, dom, sign_ok, m_ok)


def regular_line_mvgd(k: float, h: float) -> np.ndarray:
    """Closed-form modified second difference for 5 equispaced samples.

    Unit weights, spacing ``k``, grid ``h``; ordered center, -k, -2k, k, 2k.
    """
    r = (h / k) ** 2
    w = np.array([-36 - 10 * r, 24 - 5 * r, -6 + 10 * r, 24 - 5 * r, -6 + 10 * r])
    return 2 * w / (70 * h**2)


def regular_line_mls(k: float) -> np.ndarray:
    """Second derivative of the 5-point least-squares quadratic, same ordering."""
    return np.array([-2, -1, 2, -1, 2]) / (7 * k**2)
