"""End-to-end discretization of ``-Laplace-Beltrami`` on a point cloud."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .boundary import BoundaryCondition, apply_boundary, eliminate_dirichlet, make_ghosts
from .geometry import PointCloud, default_k, knn_all
from .stencil import METHODS, StencilSet, assemble, build_rows

__all__ = ["Discretization", "discretize"]


@dataclass(frozen=True, eq=False)
class Discretization:
    """Assembled operator plus what is needed to form right-hand sides.

    ``operator`` is the raw assembly. For Neumann problems its columns are the
    unknowns followed by ghost columns; ``system`` eliminates them.
    """

    cloud: PointCloud
    operator: sp.csr_matrix
    unknown_ids: np.ndarray
    stencils: StencilSet
    condition: BoundaryCondition | None
    ghosts: list = field(default_factory=list)
    k: int = 0
    method: str = "mvgd"

    @property
    def closed(self) -> bool:
        return self.condition is None

    def system(self, source=None):
        """Linear system ``(A, b)`` for ``-LB U = source`` with the boundary
        condition applied. ``source`` is given per cloud point (or scalar)."""
        n = self.cloud.n
        src = np.zeros(n) if source is None else np.broadcast_to(np.asarray(source, float), (n,))
        if self.condition is None:
            return self.operator, np.array(src, dtype=float)
        if self.condition.kind == "dirichlet":
            return apply_boundary(self.operator, src, self.condition, self.cloud)
        return apply_boundary(self.operator, src[self.unknown_ids], self.condition, self.cloud,
                              self.ghosts, self.unknown_ids)

    def eigen_matrix(self):
        """Matrix whose spectrum approximates the continuous one, with its
        cloud ids: Dirichlet rows are eliminated, ghosts folded in."""
        if self.condition is not None and self.condition.kind == "dirichlet":
            A_ii, _, inner = eliminate_dirichlet(self.operator, np.zeros(self.cloud.n), self.cloud)
            return A_ii, inner
        A, _ = self.system()
        return A, self.unknown_ids

    def reduced_system(self, source=None):
        """``(A, b, ids)`` over the true unknowns only.

        Dirichlet values are substituted into the interior equations instead
        of being kept as identity rows, which suits iterative solvers better.
        ``ids`` are the cloud points of the unknowns.
        """
        if self.condition is None or self.condition.kind != "dirichlet":
            A, b = self.system(source)
            return A, b, self.unknown_ids
        n = self.cloud.n
        src = np.zeros(n) if source is None else np.broadcast_to(np.asarray(source, float), (n,))
        A, b, ids = eliminate_dirichlet(self.operator, src, self.cloud, self.condition.f)
        return A, b, ids

    def expand(self, u, ids) -> np.ndarray:
        """Values on every cloud point from a solution over ``ids``.

        Dirichlet boundary points take the prescribed data; points that are
        not unknowns otherwise (Neumann boundary points) are NaN.
        """
        out = np.full(self.cloud.n, np.nan)
        out[np.asarray(ids, dtype=int)] = u
        if self.condition is not None and self.condition.kind == "dirichlet":
            bid = self.cloud.boundary_ids
            out[bid] = self.condition.values_at(self.cloud, bid)
        return out

    def to_cloud(self, u) -> np.ndarray:
        """Scatter a solution over unknowns back to all cloud points (NaN elsewhere)."""
        out = np.full(self.cloud.n, np.nan)
        out[self.unknown_ids] = u
        return out


def discretize(cloud: PointCloud, k: int | None = None, method: str = "mvgd",
               weights=None, condition: BoundaryCondition | None = None, kb: int = 5,
               include_boundary: bool = False) -> Discretization:
    """Assemble the discrete ``-Laplace-Beltrami`` operator.

    Parameters
    ----------
    cloud : PointCloud
    k : int, optional
        Neighbors per point; 4 for curves and 16 for surfaces by default.
    method : {"mvgd", "mls", "mvgd-div"}
    weights : {"center", "unit"}, optional
        Fit weights; "center" is 1 at the center and 1/K elsewhere. Defaults
        to unit weights for the virtual-grid methods and "center" for MLS.
    condition : BoundaryCondition, optional
        Required when the cloud has boundary points.
    kb : int
        Boundary neighbors used for the boundary tangent (Neumann).
    include_boundary : bool
        Neumann only: keep boundary points as unknowns with their own
        stencils instead of dropping them.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    k = default_k(cloud.manifold_dim) if k is None else int(k)
    n = cloud.n
    has_boundary = bool(cloud.boundary.any())
    if condition is None:
        if has_boundary:
            raise ValueError("cloud has boundary points; pass a boundary condition")
        nbr = knn_all(cloud, k)
        rows = build_rows(cloud.points, np.arange(n), nbr, method, weights, cloud.manifold_dim)
        return Discretization(cloud, assemble(n, rows), np.arange(n), rows, None, [], k, method)

    if condition.kind == "dirichlet":
        inner = cloud.interior_ids
        nbr = knn_all(cloud, k, ids=inner)
        rows = build_rows(cloud.points, inner, nbr, method, weights, cloud.manifold_dim)
        A = assemble(n, rows, identity_rows=cloud.boundary_ids)
        return Discretization(cloud, A, np.arange(n), rows, condition, [], k, method)

    if condition.kind != "neumann":
        raise ValueError(f"unknown boundary condition {condition.kind!r}")
    unknowns = np.arange(n) if include_boundary else cloud.interior_ids
    ghosts = make_ghosts(cloud, k, kb)
    ext = np.concatenate([cloud.points[unknowns]] + [g.position[None] for g in ghosts])
    nu = len(unknowns)
    nbr = knn_all(ext, k, ids=np.arange(nu))
    rows = build_rows(ext, np.arange(nu), nbr, method, weights, cloud.manifold_dim)
    A = assemble(nu, rows, n_cols=len(ext))
    return Discretization(cloud, A, unknowns, rows, condition, ghosts, k, method)
