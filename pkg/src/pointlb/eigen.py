"""Smallest eigenpairs of the discrete operator and cluster error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import BoundaryCondition
from .geometry import PointCloud
from .laplacian import discretize

__all__ = [
    "EigenResult",
    "EigenError",
    "smallest_eigs",
    "eig_errors",
    "cluster_errors",
    "open_surface_eigs",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 300
RESIDUAL_RTOL = 1e-6


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Eigenpairs sorted by real part.

    ``vectors`` holds the real parts of unit-norm eigenvectors as columns.
    ``complex_pairs`` counts conjugate pairs with a relative imaginary part
    above ``1e-10``; ``max_rel_imag`` is the largest ``|Im l| / |l|``.
    ``ids`` maps vector rows to cloud points when known.
    """

    values: np.ndarray
    vectors: np.ndarray | None
    complex_pairs: int
    max_rel_imag: float
    residuals: np.ndarray
    shift: float
    ids: np.ndarray | None = None

    @property
    def real(self) -> np.ndarray:
        """Eigenvalues with the imaginary part truncated."""
        return self.values.real


def _rel_imag(values):
    mag = np.abs(values)
    scale = np.max(mag) if len(mag) else 0.0
    ok = mag > 1e-6 * max(scale, 1.0)
    rel = np.zeros(len(values))
    rel[ok] = np.abs(values.imag[ok]) / mag[ok]
    return rel


def _residuals(A, vals, vecs):
    r = A @ vecs - vecs * vals[None, :]
    return np.linalg.norm(r, axis=0) / np.linalg.norm(vecs, axis=0)


def _dense(A, k, shift):
    vals, vecs = np.linalg.eig(A.toarray())
    order = np.argsort(np.abs(vals - shift), kind="stable")[:k]
    return vals[order], vecs[:, order]


def _arnoldi(A, k, shift, tol, ncv, v0):
    n = A.shape[0]
    lu = spla.splu((A - shift * sp.identity(n, format="csr")).tocsc())
    opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    return spla.eigs(A, k=k, sigma=shift, OPinv=opinv, ncv=ncv, tol=tol, v0=v0,
                     maxiter=max(1000, 10 * n))


def _refine(A, lam, v, steps=2):
    # inverse iteration at the pair's own eigenvalue; the shared shift near
    # zero leaves pairs far from it with limited accuracy on singular systems
    n = A.shape[0]
    mu = lam + 1e-10 * max(abs(lam), 1.0)
    lu = spla.splu((A - mu * sp.identity(n, format="csc")).tocsc().astype(complex))
    v = v.astype(complex)
    for _ in range(steps):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    mu = complex(np.vdot(v, A @ v))
    if np.imag(lam) == 0:
        # a real eigenvalue has a real eigenvector
        v = (v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))).real
        v /= np.linalg.norm(v)
        mu = complex(v @ (A @ v))
    return mu, v


def smallest_eigs(A, k: int = 10, shift: float = 1e-8, tol: float = 1e-10, ncv: int | None = None,
                  vectors: bool = True, max_retries: int = 3, seed: int = 0) -> EigenResult:
    """``k`` eigenvalues nearest ``shift`` by shift-invert Arnoldi.

    The inner solves use a sparse LU of ``A - shift I``. If the factorization
    fails the shift is moved by ``1e-6`` up to ``max_retries`` times. Pairs
    missing the residual bound get two steps of inverse iteration at their
    own eigenvalue. Small matrices (``n <= DENSE_LIMIT``) are handled
    densely.

    Raises
    ------
    ValueError
        ``k`` is not in ``[1, n - 1]``.
    EigenError
        Factorization kept failing, Arnoldi did not converge, or a returned
        pair misses the residual bound ``1e-6 (1 + |l|)``.
    """
    A = sp.csr_matrix(A, dtype=float)
    n = A.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    ncv = min(n, max(2 * k + 10, 40)) if ncv is None else ncv
    v0 = np.random.default_rng(seed).standard_normal(n)
    sigma = float(shift)
    for attempt in range(max_retries + 1):
        try:
            if n <= DENSE_LIMIT:
                vals, vecs = _dense(A, k, sigma)
            else:
                vals, vecs = _arnoldi(A, k, sigma, tol, ncv, v0)
            break
        except RuntimeError as exc:
            if isinstance(exc, spla.ArpackNoConvergence):
                raise EigenError(f"Arnoldi did not converge: {exc}") from None
            if attempt == max_retries:
                raise EigenError(f"factorization of A - sigma I failed at sigma={sigma}: {exc}") from None
            sigma += 1e-6
    res = _residuals(A, vals, vecs)
    bound = RESIDUAL_RTOL * (1 + np.abs(vals))
    bad = np.flatnonzero(res > bound)
    if len(bad):
        vals, vecs = vals.astype(complex), vecs.astype(complex)
        for i in bad:
            vals[i], vecs[:, i] = _refine(A, vals[i], vecs[:, i])
        if np.all(vals.imag == 0):
            vals, vecs = vals.real, vecs.real
        res = _residuals(A, vals, vecs)
        bound = RESIDUAL_RTOL * (1 + np.abs(vals))
    if np.any(res > bound):
        i = int(np.argmax(res / bound))
        raise EigenError(f"eigenpair {vals[i]:.6g} has residual {res[i]:.3e} above {bound[i]:.3e}")
    order = np.lexsort((vals.imag, vals.real))
    vals, vecs, res = vals[order], vecs[:, order], res[order]
    rel = _rel_imag(vals)
    pairs = int(np.sum((rel > 1e-10) & (vals.imag > 0)))
    out = None
    if vectors:
        out = vecs.real / np.maximum(np.linalg.norm(vecs.real, axis=0), np.finfo(float).tiny)
    return EigenResult(vals, out, pairs, float(rel.max(initial=0.0)), res, sigma)


def eig_errors(values, lam: float, multiplicity: int):
    """Relative L2 and Linf errors of the ``multiplicity`` values nearest ``lam``.

    Imaginary parts are dropped first. For ``lam == 0`` absolute errors are
    returned.
    """
    v = np.real(np.asarray(values))
    if multiplicity < 1:
        raise ValueError("multiplicity must be positive")
    if len(v) < multiplicity:
        raise ValueError(f"need {multiplicity} values, got {len(v)}")
    near = v[np.argsort(np.abs(v - lam), kind="stable")[:multiplicity]]
    dev = (near - lam) / lam if lam != 0 else near - lam
    return float(np.sqrt(np.mean(dev**2))), float(np.max(np.abs(dev)))


def cluster_errors(values, clusters) -> list[dict]:
    """Errors for each ``(index, lam, multiplicity)`` in ``clusters``."""
    out = []
    for idx, lam, mult in clusters:
        e2, einf = eig_errors(values, lam, mult)
        out.append({"n": int(idx), "lambda": float(lam), "multiplicity": int(mult),
                    "E2": e2, "Einf": einf})
    return out


def open_surface_eigs(cloud: PointCloud, condition: BoundaryCondition, k: int = 40,
                      shift: float = 1e-8, **kwargs) -> EigenResult:
    """Eigenpairs of a boundary-tagged cloud under a homogeneous condition.

    Dirichlet rows are eliminated and Neumann ghosts folded in before the
    eigen-solve; the result's ``ids`` are the cloud points of the unknowns.
    Extra keyword arguments go to :func:`~pointlb.laplacian.discretize`.
    """
    if not cloud.boundary.any():
        raise ValueError("cloud has no boundary points")
    disc = discretize(cloud, condition=condition, **kwargs)
    A, ids = disc.eigen_matrix()
    r = smallest_eigs(A, min(k, A.shape[0] - 1), shift)
    return EigenResult(r.values, r.vectors, r.complex_pairs, r.max_rel_imag, r.residuals, r.shift, ids)
