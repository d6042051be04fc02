"""Point-cloud storage, exact K-nearest-neighbor search and local PCA frames."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "PointCloud",
    "LocalFrame",
    "GeometryError",
    "DegenerateNeighborhoodError",
    "knn",
    "knn_all",
    "knn_brute",
    "pca_frame",
    "pca_axes",
    "local_frames",
    "to_local",
    "from_local",
    "default_k",
]

_KNN_PAD = 4
_TIE_RTOL = 1e-9
_DEGENERATE_RTOL = 1e-10


class GeometryError(ValueError):
    """Invalid point-cloud input or query."""


class DegenerateNeighborhoodError(GeometryError):
    """Neighborhood too degenerate to define a local frame or grid."""


def default_k(manifold_dim: int) -> int:
    """Four neighbors on curves (the symmetric five-point stencil), 16 on surfaces."""
    return 4 if manifold_dim == 1 else 16


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered sample of a curve or surface.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Ambient coordinates, d in {2, 3}.
    boundary : array_like of bool, shape (n,), optional
        True for boundary points. Defaults to all interior.
    manifold_dim : int, optional
        Intrinsic dimension m. Defaults to ``d - 1`` (only codimension one
        is supported).
    values : array_like, shape (n,), optional
        Optional per-point scalar carried alongside the points.
    """

    points: np.ndarray
    boundary: np.ndarray | None = None
    manifold_dim: int | None = None
    values: np.ndarray | None = None
    _tree: cKDTree | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise GeometryError(f"points must have shape (n, 2) or (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("points contain non-finite coordinates")
        n, d = pts.shape
        m = d - 1 if self.manifold_dim is None else int(self.manifold_dim)
        if m != d - 1:
            raise GeometryError(f"only codimension-one clouds are supported (d={d}, m={m})")
        uniq, first, counts = np.unique(pts, axis=0, return_index=True, return_counts=True)
        if np.any(counts > 1):
            dup = uniq[np.argmax(counts > 1)]
            raise GeometryError(f"duplicate point {dup.tolist()} in cloud")
        if self.boundary is None:
            bnd = np.zeros(n, dtype=bool)
        else:
            bnd = np.asarray(self.boundary).astype(bool).reshape(-1)
            if bnd.shape != (n,):
                raise GeometryError("boundary flags must have one entry per point")
        vals = None
        if self.values is not None:
            vals = np.array(self.values, dtype=float).reshape(-1)
            if vals.shape != (n,):
                raise GeometryError("values must have one entry per point")
            vals.setflags(write=False)
        pts.setflags(write=False)
        bnd.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "boundary", bnd)
        object.__setattr__(self, "manifold_dim", m)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def interior_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def boundary_ids(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            object.__setattr__(self, "_tree", cKDTree(self.points))
        return self._tree

    def __len__(self) -> int:
        return self.n


def _distances(points, i, cand):
    diff = points[cand] - points[i]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def knn_brute(points: np.ndarray, i: int, k: int) -> np.ndarray:
    """All-pairs oracle: the k nearest points to ``points[i]`` (self excluded),
    sorted by distance then id."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k <= n - 1:
        raise GeometryError(f"need 1 <= K <= N-1, got K={k}, N={n}")
    ids = np.delete(np.arange(n), i)
    dist = _distances(points, i, ids)
    order = np.lexsort((ids, dist))
    return ids[order[:k]]


def knn_all(cloud: PointCloud | np.ndarray, k: int, ids=None) -> np.ndarray:
    """Exact K nearest neighbors for many query points at once.

    Returns an integer array of shape ``(len(ids), k)``; each row is sorted by
    Euclidean distance with ties broken by lower point id. The query point is
    never its own neighbor.
    """
    if not isinstance(cloud, PointCloud):
        points = np.asarray(cloud, dtype=float)
        tree = cKDTree(points)
    else:
        points, tree = cloud.points, cloud.tree
    n = len(points)
    if not 1 <= k <= n - 1:
        raise GeometryError(f"need 1 <= K <= N-1, got K={k}, N={n}")
    ids = np.arange(n) if ids is None else np.asarray(ids, dtype=int).reshape(-1)
    kq = min(k + 1 + _KNN_PAD, n)
    tree_d, cand = tree.query(points[ids], k=kq)
    cand = np.sort(cand, axis=1)
    dist = np.sqrt(np.sum((points[cand] - points[ids][:, None, :]) ** 2, axis=-1))
    dist[cand == ids[:, None]] = -1.0
    order = np.argsort(dist, axis=1, kind="stable")
    cand = np.take_along_axis(cand, order, axis=1)
    dist = np.take_along_axis(dist, order, axis=1)
    out = cand[:, 1 : k + 1].copy()
    if kq < n:
        # candidates may have cut a tie at the K-th distance
        dk = dist[:, k]
        risky = np.flatnonzero(tree_d[:, -1] <= dk * (1 + _TIE_RTOL))
        for r in risky:
            i = ids[r]
            near = np.array(tree.query_ball_point(points[i], dk[r] * (1 + 2 * _TIE_RTOL)), dtype=int)
            near = near[near != i]
            dn = _distances(points, i, near)
            out[r] = near[np.lexsort((near, dn))[:k]]
    return out


def knn(cloud: PointCloud, i: int, k: int) -> np.ndarray:
    """The K nearest neighbors of point ``i`` (excluding itself)."""
    return knn_all(cloud, k, ids=[i])[0]


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each vector (last axis) so its first nonzero component is positive."""
    big = np.abs(vectors) > 1e-12
    first = np.argmax(big, axis=-1)
    lead = np.take_along_axis(vectors, first[..., None], axis=-1)
    return vectors * np.where(lead < 0, -1.0, 1.0)


def pca_axes(neighbors: np.ndarray, manifold_dim: int | None = None):
    """Principal axes of one or many neighbor sets.

    Parameters
    ----------
    neighbors : ndarray, shape (..., K, d)
    manifold_dim : int, optional
        Used only for the degeneracy check between the last tangent and
        first normal eigenvalue.

    Returns
    -------
    axes : ndarray, shape (..., d, d)
        Rows are unit eigenvectors of the neighbor covariance sorted by
        descending eigenvalue; the last row approximates the normal.
    eigvals : ndarray, shape (..., d)
    """
    neighbors = np.asarray(neighbors, dtype=float)
    d = neighbors.shape[-1]
    m = d - 1 if manifold_dim is None else manifold_dim
    centered = neighbors - neighbors.mean(axis=-2, keepdims=True)
    cov = np.einsum("...ki,...kj->...ij", centered, centered)
    w, v = np.linalg.eigh(cov)
    w = w[..., ::-1]
    axes = np.swapaxes(v[..., ::-1], -1, -2)
    gap = w[..., m - 1] - w[..., m]
    bad = gap <= _DEGENERATE_RTOL * np.maximum(w[..., 0], np.finfo(float).tiny)
    if np.any(bad):
        raise DegenerateNeighborhoodError(
            f"{int(np.sum(bad))} neighborhood(s) have no separated normal direction"
        )
    return _orient(axes), w


@dataclass(frozen=True, eq=False)
class LocalFrame:
    """PCA coordinate frame at one point.

    ``axes`` holds the frame vectors as rows, tangents first and the normal
    last. ``local_coords`` lists the center (always the zero tuple) followed
    by the neighbors in ``neighbor_ids`` order.
    """

    center_index: int
    origin: np.ndarray
    axes: np.ndarray
    neighbor_ids: np.ndarray
    local_coords: np.ndarray

    @property
    def ids(self) -> np.ndarray:
        return np.concatenate([[self.center_index], self.neighbor_ids])

    def to_local(self, q) -> np.ndarray:
        return to_local(self, q)

    def from_local(self, c) -> np.ndarray:
        return from_local(self, c)


def to_local(frame: LocalFrame, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != frame.origin.shape[0]:
        raise GeometryError("ambient dimension mismatch")
    return (q - frame.origin) @ frame.axes.T


def from_local(frame: LocalFrame, c) -> np.ndarray:
    return np.asarray(c, dtype=float) @ frame.axes + frame.origin


def local_frames(points: np.ndarray, centers: np.ndarray, neighbor_ids: np.ndarray,
                 manifold_dim: int | None = None):
    """Batched PCA frames.

    Returns ``(axes, coords)`` where ``axes`` has shape (n, d, d) and
    ``coords`` has shape (n, K+1, d): local coordinates of the center (row 0,
    exactly zero) and its neighbors, relative to the center point.
    """
    points = np.asarray(points, dtype=float)
    centers = np.asarray(centers, dtype=int)
    nbr = points[neighbor_ids]
    axes, _ = pca_axes(nbr, manifold_dim)
    rel = nbr - points[centers][:, None, :]
    coords = np.einsum("nkd,ned->nke", rel, axes)
    coords = np.concatenate([np.zeros((len(centers), 1, points.shape[1])), coords], axis=1)
    return axes, coords


def pca_frame(cloud: PointCloud, i: int, neighbor_ids) -> LocalFrame:
    """PCA frame at point ``i`` from the given neighbors.

    The covariance is taken about the neighbors' barycenter but the frame
    origin is the point itself.
    """
    neighbor_ids = np.asarray(neighbor_ids, dtype=int)
    if len(neighbor_ids) < cloud.dim:
        raise GeometryError(f"need at least {cloud.dim} neighbors, got {len(neighbor_ids)}")
    axes, coords = local_frames(cloud.points, np.array([i]), neighbor_ids[None, :], cloud.manifold_dim)
    origin = cloud.points[i].copy()
    return LocalFrame(int(i), origin, axes[0], neighbor_ids.copy(), coords[0])
