"""Meshfree Laplace-Beltrami discretization on point clouds.

The operator is built point by point: a PCA frame and quadratic
least-squares fits give a local graph of the manifold and a local
approximation of the function; centered differences on a small virtual
grid around each point, with the fitted center value replaced by the
actual sample, give one sparse row. Assembled matrices represent
``-Laplace-Beltrami`` so that spectra are nonnegative.
"""

from .boundary import BoundaryCondition, apply_boundary, dirichlet, neumann
from .eigen import EigenResult, eig_errors, open_surface_eigs, smallest_eigs
from .geometry import PointCloud, knn, pca_frame
from .laplacian import Discretization, discretize
from .sampling import SamplerSpec, read_cloud, sample, write_cloud
from .solver import SolveReport, amg_solve, gauss_seidel, gmres, splitting_spectrum
from .stencil import assemble, row_diagnostics

__all__ = [
    "PointCloud",
    "knn",
    "pca_frame",
    "Discretization",
    "discretize",
    "BoundaryCondition",
    "dirichlet",
    "neumann",
    "apply_boundary",
    "assemble",
    "row_diagnostics",
    "SolveReport",
    "amg_solve",
    "gauss_seidel",
    "gmres",
    "splitting_spectrum",
    "EigenResult",
    "smallest_eigs",
    "eig_errors",
    "open_surface_eigs",
    "SamplerSpec",
    "sample",
    "read_cloud",
    "write_cloud",
]

__version__ = "0.1.0"
