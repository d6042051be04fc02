"""Dirichlet enforcement and ghost-point reflection for Neumann conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .geometry import GeometryError, PointCloud, default_k, knn_all, pca_axes
from .localfit import fit_operators
from .stencil import AssemblyError

__all__ = [
    "BoundaryFrame",
    "GhostPoint",
    "BoundaryCondition",
    "dirichlet",
    "neumann",
    "boundary_frame",
    "reflect_interior",
    "make_ghosts",
    "apply_boundary",
    "eliminate_dirichlet",
]


@dataclass(frozen=True, eq=False)
class BoundaryFrame:
    """Orthonormal frame at a boundary point.

    ``e1`` is the boundary tangent, ``e2`` the surface normal and
    ``e3 = e1 x e2`` the in-surface boundary normal, oriented outward
    (interior points nearby have negative ``e3`` coordinate).
    """

    boundary_point: int
    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray

    @property
    def axes(self) -> np.ndarray:
        return np.stack([self.e1, self.e2, self.e3])

    def to_local(self, q) -> np.ndarray:
        return (np.asarray(q, dtype=float) - self.origin) @ self.axes.T

    def from_local(self, c) -> np.ndarray:
        return np.asarray(c, dtype=float) @ self.axes + self.origin

    def reflect(self, q) -> np.ndarray:
        """Mirror image ``(x, y, z) -> (x, y, -z)`` in frame coordinates."""
        q = np.asarray(q, dtype=float)
        return q - 2 * np.outer((q - self.origin) @ self.e3, self.e3).reshape(q.shape)


@dataclass(frozen=True, eq=False)
class GhostPoint:
    """Reflection of an interior point across the nearest boundary point.

    The ghost value is ``U(source) + distance * f(anchor)``.
    """

    source: int
    anchor: int
    position: np.ndarray
    distance: float

    def value(self, u_source: float, f_anchor: float = 0.0) -> float:
        return u_source + self.distance * f_anchor


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    f: float | np.ndarray | Callable = 0.0

    def values_at(self, cloud: PointCloud, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=int)
        f = self.f
        if callable(f):
            return np.asarray(f(cloud.points[ids]), dtype=float).reshape(len(ids))
        f = np.asarray(f, dtype=float)
        if f.ndim == 0:
            return np.full(len(ids), float(f))
        return f[ids]


def dirichlet(f=0.0) -> BoundaryCondition:
    """``U = f`` on the boundary. ``f`` is a scalar, a per-point array or a callable of points."""
    return BoundaryCondition("dirichlet", f)


def neumann(f=0.0) -> BoundaryCondition:
    """Outward normal derivative ``dU/dn = f`` on the boundary."""
    return BoundaryCondition("neumann", f)


def _boundary_tree(cloud):
    b = cloud.boundary_ids
    if len(b) < 3:
        raise GeometryError(f"need at least 3 boundary points, got {len(b)}")
    return b, cKDTree(cloud.points[b])


def _curve_tangent(pts):
    """Tangent at ``pts[0]`` of a quadratic curve fitted through ``pts``."""
    axes, _ = pca_axes(pts, manifold_dim=1)
    rel = pts - pts[0]
    loc = rel @ axes.T
    W, _ = fit_operators(loc[None, :, :1], "unit")
    slopes = W[0, 1] @ loc[:, 1:]
    t = axes[0] + slopes @ axes[1:]
    return t / np.linalg.norm(t)


def boundary_frame(cloud: PointCloud, j: int, kb: int = 5, k: int | None = None,
                   _btree=None) -> BoundaryFrame:
    """Frame at boundary point ``j``.

    The tangent comes from a quadratic curve through the ``kb`` nearest
    boundary points, the surface normal from PCA over the ``k`` nearest
    points of the whole cloud.
    """
    if cloud.dim != 3:
        raise GeometryError("boundary frames are defined for surfaces in 3D")
    if not cloud.boundary[j]:
        raise GeometryError(f"point {j} is not a boundary point")
    b, btree = _btree if _btree is not None else _boundary_tree(cloud)
    kb = min(kb, len(b) - 1)
    _, near = btree.query(cloud.points[j], k=kb + 1)
    near = b[np.atleast_1d(near)]
    near = np.concatenate([[j], near[near != j][:kb]])
    e1 = _curve_tangent(cloud.points[near])
    k = default_k(cloud.manifold_dim) if k is None else k
    nbr = knn_all(cloud, k, ids=[j])[0]
    axes, _ = pca_axes(cloud.points[nbr])
    e2 = axes[-1]
    e1 = e1 - (e1 @ e2) * e2
    e1 /= np.linalg.norm(e1)
    e3 = np.cross(e1, e2)
    inner = nbr[~cloud.boundary[nbr]]
    if len(inner) and np.mean((cloud.points[inner] - cloud.points[j]) @ e3) > 0:
        e1, e3 = -e1, -e3
    return BoundaryFrame(int(j), cloud.points[j].copy(), e1, e2, e3)


def make_ghosts(cloud: PointCloud, k: int | None = None, kb: int = 5,
                ids=None) -> list[GhostPoint]:
    """Ghosts for every interior point (or the given ones) that has a
    boundary point among its K nearest neighbors, in increasing source order."""
    k = default_k(cloud.manifold_dim) if k is None else k
    b, btree = _boundary_tree(cloud)
    ids = cloud.interior_ids if ids is None else np.asarray(ids, dtype=int)
    if np.any(cloud.boundary[ids]):
        raise GeometryError("ghosts are built from interior points only")
    if len(ids) == 0:
        return []
    nbr = knn_all(cloud, k, ids=ids)
    near_bnd = cloud.boundary[nbr].any(axis=1)
    src = ids[near_bnd]
    if len(src) == 0:
        return []
    _, anchor_pos = btree.query(cloud.points[src])
    anchors = b[anchor_pos]
    frames = {}
    ghosts = []
    for s, a in zip(src, anchors):
        if a not in frames:
            frames[a] = boundary_frame(cloud, a, kb, k, _btree=(b, btree))
        fr = frames[a]
        p = cloud.points[s]
        pos = fr.reflect(p)
        ghosts.append(GhostPoint(int(s), int(a), pos, float(np.linalg.norm(p - pos))))
    return ghosts


def reflect_interior(cloud: PointCloud, i: int, k: int | None = None, kb: int = 5) -> GhostPoint | None:
    """Ghost of interior point ``i``, or None when no KNN is a boundary point."""
    if cloud.boundary[i]:
        raise GeometryError(f"point {i} is a boundary point")
    g = make_ghosts(cloud, k, kb, ids=[i])
    return g[0] if g else None


def apply_boundary(op, rhs, condition: BoundaryCondition, cloud: PointCloud | None = None,
                   ghosts=None, unknown_ids=None):
    """Impose a boundary condition on an assembled ``-Laplace-Beltrami`` system.

    Dirichlet
        ``op`` is square over all cloud points; boundary rows become identity
        rows and the right-hand side takes ``f`` there.
    Neumann
        ``op`` has one column per unknown (cloud ids ``unknown_ids``) followed
        by one column per ghost in ``ghosts`` order. Each ghost column is
        folded into its source column and the affine part
        ``distance * f(anchor)`` moves to the right-hand side.

    Returns the modified ``(matrix, rhs)``.
    """
    A = sp.csr_matrix(op)
    b = np.array(rhs, dtype=float)
    if condition.kind == "dirichlet":
        if cloud is None:
            raise ValueError("Dirichlet conditions need the cloud for boundary flags")
        bmask = cloud.boundary.astype(float)
        A = sp.diags(1.0 - bmask) @ A + sp.diags(bmask)
        A = sp.csr_matrix(A)
        A.eliminate_zeros()
        bid = cloud.boundary_ids
        b[bid] = condition.values_at(cloud, bid)
        return A, b
    if condition.kind != "neumann":
        raise ValueError(f"unknown boundary condition {condition.kind!r}")
    ghosts = [] if ghosts is None else list(ghosts)
    nu = A.shape[0] if unknown_ids is None else len(unknown_ids)
    ng = A.shape[1] - nu
    if ng > len(ghosts):
        raise AssemblyError(f"{ng - len(ghosts)} ghost column(s) have no value rule")
    if ng == 0:
        return A[:, :nu].tocsr(), b
    ghosts = ghosts[:ng]
    unknown_ids = np.arange(nu) if unknown_ids is None else np.asarray(unknown_ids, dtype=int)
    col_of = {int(c): i for i, c in enumerate(unknown_ids)}
    try:
        src_col = np.array([col_of[g.source] for g in ghosts], dtype=int)
    except KeyError as exc:
        raise AssemblyError(f"ghost source {exc} is not an unknown") from None
    dist = np.array([g.distance for g in ghosts])
    if cloud is not None:
        fvals = condition.values_at(cloud, [g.anchor for g in ghosts])
    else:
        f = condition.f
        if callable(f) or np.ndim(f) > 0:
            raise ValueError("non-constant Neumann data needs the cloud")
        fvals = np.full(ng, float(f))
    G = sp.csr_matrix((np.ones(ng), (np.arange(ng), src_col)), shape=(ng, nu))
    Ag = A[:, nu:]
    A_red = (A[:, :nu] + Ag @ G).tocsr()
    A_red.sum_duplicates()
    A_red.sort_indices()
    return A_red, b - Ag @ (dist * fvals)


def eliminate_dirichlet(A, rhs, cloud: PointCloud, f=None):
    """Interior-only system after substituting known boundary values.

    Returns ``(A_ii, rhs_i, interior_ids)``.
    """
    A = sp.csr_matrix(A)
    inner, bnd = cloud.interior_ids, cloud.boundary_ids
    fb = np.zeros(len(bnd)) if f is None else BoundaryCondition("dirichlet", f).values_at(cloud, bnd)
    A_ii = A[inner][:, inner].tocsr()
    rhs_i = np.asarray(rhs, dtype=float)[inner] - A[inner][:, bnd] @ fb
    return A_ii, rhs_i, inner
