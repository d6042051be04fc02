"""Local weighted least-squares fits of the manifold graph and of functions on it.

Everything here works in a local frame whose tangent coordinates are ``x``
(curves) or ``(x, y)`` (surfaces). Quadratic monomials are ordered as

* curves: ``1, x, x**2``
* surfaces: ``1, x, y, x**2, x*y, y**2``

Closed-form Laplace-Beltrami expansion
--------------------------------------
For a surface graph ``z(x, y)`` write ``p = z_x``, ``q = z_y``, ``r = z_xx``,
``s = z_xy``, ``t = z_yy`` and ``g = 1 + p**2 + q**2``. The Christoffel symbols
of a graph are ``z_ab z_c / g``, so the intrinsic Laplacian
``g^{ab} (U_ab - Gamma^c_ab U_c)`` expands to::

    A1 U_x + A2 U_y + A3 U_xx + A4 U_xy + A5 U_yy

    A3 = (1 + q**2) / g
    A4 = -2 p q / g
    A5 = (1 + p**2) / g
    k  = ((1 + q**2) r - 2 p q s + (1 + p**2) t) / g
    A1 = -k p / g
    A2 = -k q / g

For a curve graph ``y(x)`` the same reasoning gives
``U_xx / (1 + y_x**2) - y_x y_xx U_x / (1 + y_x**2)**2``.
The tests check both against nested finite differences of the divergence
form ``g^{-1/2} d_a (g^{1/2} g^{ab} d_b U)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DegenerateNeighborhoodError

__all__ = [
    "SurfaceFit",
    "FunctionFitOperator",
    "LBCoefficients",
    "monomials",
    "monomial_exponents",
    "fit_weights",
    "fit_operators",
    "function_fit_operator",
    "fit_surface",
    "eval_surface",
    "eval_surface_slope",
    "lb_coefficients",
    "lb_coefficient_array",
    "COND_LIMIT",
]

COND_LIMIT = 1e12


def monomial_exponents(m: int, degree: int = 2) -> np.ndarray:
    if m == 1:
        return np.array([[0], [1], [2]])[: degree + 1]
    exps = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    return np.array(exps[: {0: 1, 1: 3, 2: 6}[degree]])


def monomials(coords, m: int | None = None) -> np.ndarray:
    """Quadratic monomial vectors of tangent coordinates, shape (..., n_mono)."""
    coords = np.asarray(coords, dtype=float)
    if m is None:
        m = coords.shape[-1]
    exps = monomial_exponents(m)
    return np.prod(coords[..., None, :m] ** exps, axis=-1)


def fit_weights(n_points: int, mode: str = "center") -> np.ndarray:
    """Weights for a center point followed by ``n_points - 1`` neighbors.

    ``"center"``: 1 at the center and 1/K elsewhere. ``"unit"``: all ones.
    """
    if mode == "unit":
        return np.ones(n_points)
    if mode == "center":
        w = np.full(n_points, 1.0 / (n_points - 1))
        w[0] = 1.0
        return w
    raise ValueError(f"unknown weight mode {mode!r}")


def _pinv_weighted(design, sw):
    """Weighted pseudo-inverse and squared condition number, batched."""
    aw = design * sw[..., :, None]
    u, sv, vt = np.linalg.svd(aw, full_matrices=False)
    smin = sv[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond2 = np.where(smin > 0, (sv[..., 0] / smin) ** 2, np.inf)
        inv = np.where(sv > 0, 1.0 / sv, 0.0)
    w = np.einsum("...ji,...j,...kj->...ik", vt, inv, u) * sw[..., None, :]
    return w, cond2


def fit_operators(tangent_coords, weights: str | np.ndarray = "center"):
    """Least-squares operators for a batch of neighborhoods.

    Parameters
    ----------
    tangent_coords : ndarray, shape (n, K+1, m)
        Tangent coordinates, center first.
    weights : {"center", "unit"} or ndarray of shape (K+1,)

    Returns
    -------
    W : ndarray, shape (n, n_mono, K+1)
        ``b = W @ U`` gives the quadratic coefficients of the fit.
    fallback : ndarray of bool, shape (n,)
        Points where the quadratic fit was too ill-conditioned and a linear
        fit was used instead (quadratic rows of ``W`` are zero).
    """
    tc = np.asarray(tangent_coords, dtype=float)
    n, npts, m = tc.shape
    w = fit_weights(npts, weights) if isinstance(weights, str) else np.asarray(weights, float)
    sw = np.broadcast_to(np.sqrt(w), (n, npts))
    # column scaling: identical operator in exact arithmetic, sane conditioning
    scale = np.max(np.abs(tc), axis=(1, 2))
    scale = np.where(scale > 0, scale, 1.0)
    exps = monomial_exponents(m)
    order = exps.sum(axis=1)
    design = monomials(tc / scale[:, None, None], m)
    W, cond2 = _pinv_weighted(design, sw)
    fallback = ~(cond2 < COND_LIMIT)
    if np.any(fallback):
        lin = order <= 1
        Wl, cond_l = _pinv_weighted(design[fallback][..., lin], sw[fallback])
        if not np.all(cond_l < COND_LIMIT):
            raise DegenerateNeighborhoodError("neighborhood too degenerate even for a linear fit")
        Wf = np.zeros((int(fallback.sum()),) + W.shape[1:])
        Wf[:, lin] = Wl
        W[fallback] = Wf
    W = W / scale[:, None, None] ** order[None, :, None]
    return W, fallback


@dataclass(frozen=True, eq=False)
class FunctionFitOperator:
    """Linear map from stacked samples (center first) to fit coefficients."""

    weights: np.ndarray
    manifold_dim: int
    linear_fallback: bool = False

    def __matmul__(self, values):
        return self.weights @ np.asarray(values, dtype=float)

    def apply(self, values) -> np.ndarray:
        return self @ values


def function_fit_operator(tangent_coords, weights="center") -> FunctionFitOperator:
    """Fit operator for one neighborhood.

    ``tangent_coords`` has shape (K+1,) or (K+1, 1) for curves and (K+1, 2)
    for surfaces, center first.
    """
    tc = np.asarray(tangent_coords, dtype=float)
    if tc.ndim == 1:
        tc = tc[:, None]
    if tc.shape[1] not in (1, 2):
        raise ValueError("tangent coordinates must have 1 or 2 columns")
    return _function_fit_operator(tc, weights)


def _function_fit_operator(tc, weights):
    m = tc.shape[1]
    if len(tc) < len(monomial_exponents(m)):
        raise DegenerateNeighborhoodError(f"need at least {len(monomial_exponents(m))} points")
    W, fb = fit_operators(tc[None], weights)
    return FunctionFitOperator(W[0], m, bool(fb[0]))


@dataclass(frozen=True, eq=False)
class SurfaceFit:
    """Quadratic graph of the manifold over its tangent coordinates."""

    a: np.ndarray
    manifold_dim: int
    linear_fallback: bool = False

    @property
    def slope(self) -> np.ndarray:
        """First derivatives at the origin."""
        return self.a[1 : 1 + self.manifold_dim]


def fit_surface(local_coords, weights="center") -> SurfaceFit:
    """Least-squares quadratic graph through frame coordinates.

    ``local_coords`` has shape (K+1, d): tangent columns then the normal
    (height) column, center first.
    """
    lc = np.asarray(local_coords, dtype=float)
    m = lc.shape[1] - 1
    op = _function_fit_operator(lc[:, :m], weights)
    return SurfaceFit(op.weights @ lc[:, m], m, op.linear_fallback)


def eval_surface(fit: SurfaceFit, point) -> float:
    return float(monomials(np.atleast_1d(np.asarray(point, dtype=float)), fit.manifold_dim) @ fit.a)


def eval_surface_slope(fit: SurfaceFit, point) -> np.ndarray | float:
    """Gradient of the graph at tangent coordinates ``point``."""
    a = fit.a
    if fit.manifold_dim == 1:
        x = float(np.ravel(point)[0])
        return a[1] + 2 * a[2] * x
    x, y = np.asarray(point, dtype=float)
    return np.array([a[1] + 2 * a[3] * x + a[4] * y, a[2] + 2 * a[5] * y + a[4] * x])


@dataclass(frozen=True)
class LBCoefficients:
    """Coefficients multiplying the derivatives of U in the expanded operator.

    Curves: ``values = (c1, c2)`` for ``(U_x, U_xx)``. Surfaces:
    ``values = (A1, ..., A5)`` for ``(U_x, U_y, U_xx, U_xy, U_yy)``.
    """

    values: tuple

    def __getitem__(self, k):
        return self.values[k]


def lb_coefficient_array(a: np.ndarray, m: int) -> np.ndarray:
    """Batched closed-form coefficients from graph coefficients ``a`` (..., n_mono)."""
    a = np.asarray(a, dtype=float)
    if m == 1:
        p, r = a[..., 1], 2 * a[..., 2]
        g = 1 + p * p
        return np.stack([-p * r / g**2, 1 / g], axis=-1)
    p, q = a[..., 1], a[..., 2]
    r, s, t = 2 * a[..., 3], a[..., 4], 2 * a[..., 5]
    g = 1 + p * p + q * q
    k = ((1 + q * q) * r - 2 * p * q * s + (1 + p * p) * t) / g
    return np.stack([-k * p / g, -k * q / g, (1 + q * q) / g, -2 * p * q / g, (1 + p * p) / g], axis=-1)


def lb_coefficients(fit: SurfaceFit) -> LBCoefficients:
    return LBCoefficients(tuple(float(v) for v in lb_coefficient_array(fit.a, fit.manifold_dim)))
