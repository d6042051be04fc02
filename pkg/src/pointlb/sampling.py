"""Test point clouds, manufactured problems and the point-cloud text format.

Text format: one point per line, whitespace separated; ``d`` coordinates,
then an optional integer boundary flag (0/1), then an optional value.
Lines starting with ``#`` are comments; a ``# dim <d>`` comment fixes the
ambient dimension (otherwise 2 or 3 columns mean bare coordinates and 4 or
5 columns mean 3D coordinates with flag and value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import PointCloud

__all__ = [
    "SamplerSpec",
    "SamplerError",
    "CloudFormatError",
    "SHAPES",
    "sample",
    "line",
    "circle",
    "closed_curve",
    "fibonacci_sphere",
    "random_sphere",
    "gbpm",
    "hemisphere",
    "torus",
    "curve_radius",
    "manufactured_problem",
    "NEUMANN_DATA",
    "exact_eigenvalue",
    "eigen_count",
    "distance_to_manifold",
    "read_cloud",
    "write_cloud",
]

GBPM_BAND = 1.2
STAR_AMPLITUDE = 0.3
TORUS_R, TORUS_r = 1.0, 0.4

SHAPES = {
    "line": ("uniform", "random"),
    "circle": ("uniform", "random", "gbpm"),
    "closed_curve": ("uniform", "random", "gbpm"),
    "sphere": ("uniform", "fibonacci", "random", "gbpm"),
    "hemisphere": ("uniform", "random"),
    "torus": ("uniform",),
    "file": ("file",),
}


class SamplerError(ValueError):
    pass


class CloudFormatError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class SamplerSpec:
    """What to sample. Exactly one of ``n`` and ``dx`` sets the size
    (``dx`` for GBPM, ``n`` otherwise)."""

    shape: str
    mode: str = "uniform"
    n: int | None = None
    dx: float | None = None
    seed: int = 0
    path: str | None = None
    boundary_points: int | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise SamplerError(f"unknown shape {self.shape!r}")
        if self.mode not in SHAPES[self.shape]:
            raise SamplerError(f"mode {self.mode!r} is not available for shape {self.shape!r}")
        if self.shape == "file":
            if not self.path:
                raise SamplerError("file sampling needs a path")
            return
        if self.mode == "gbpm":
            if self.dx is None or not self.dx > 0:
                raise SamplerError("gbpm sampling needs a positive dx")
        elif self.n is None or self.n < 10:
            raise SamplerError("sampling needs n >= 10")


def sample(spec: SamplerSpec) -> PointCloud:
    s, mode = spec.shape, spec.mode
    if s == "file":
        return read_cloud(spec.path)
    if mode == "gbpm":
        cloud = gbpm(s, spec.dx)
        if cloud.n < 10:
            raise SamplerError(f"dx={spec.dx} yields only {cloud.n} points")
        return cloud
    if s == "line":
        return line(spec.n, mode, spec.seed)
    if s == "circle":
        return circle(spec.n, mode, spec.seed)
    if s == "closed_curve":
        return closed_curve(spec.n, mode, spec.seed)
    if s == "sphere":
        return random_sphere(spec.n, spec.seed) if mode == "random" else fibonacci_sphere(spec.n)
    if s == "hemisphere":
        return hemisphere(spec.n, mode, spec.seed, spec.boundary_points)
    return torus(spec.n)


def _angles(n, mode, seed):
    if mode == "uniform":
        return 2 * np.pi * np.arange(n) / n
    return np.sort(np.random.default_rng(seed).uniform(0, 2 * np.pi, n))


def line(n: int, mode: str = "uniform", seed: int = 0) -> PointCloud:
    """Segment ``[0, 1]`` on the x-axis in the plane; both ends are boundary points."""
    if mode == "uniform":
        x = np.linspace(0.0, 1.0, n)
    else:
        x = np.concatenate([[0.0], np.sort(np.random.default_rng(seed).uniform(0, 1, n - 2)), [1.0]])
    bnd = np.zeros(n, bool)
    bnd[[0, -1]] = True
    return PointCloud(np.column_stack([x, np.zeros(n)]), boundary=bnd)


def circle(n: int, mode: str = "uniform", seed: int = 0) -> PointCloud:
    """Unit circle: equiangular or i.i.d. uniform angles."""
    t = _angles(n, mode, seed)
    return PointCloud(np.column_stack([np.cos(t), np.sin(t)]))


def curve_radius(t):
    """Star-shaped test curve ``r = 1 + 0.3 cos 3t``."""
    return 1 + STAR_AMPLITUDE * np.cos(3 * t)


def _curve_point(t):
    r = curve_radius(t)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def closed_curve(n: int, mode: str = "uniform", seed: int = 0) -> PointCloud:
    return PointCloud(_curve_point(_angles(n, mode, seed)))


def _curve_closest(q, iters=30):
    """Closest points on the star curve to query points ``q`` (Newton on the
    squared distance, started from a dense parameter scan)."""
    grid = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    gp = _curve_point(grid)
    t = np.empty(len(q))
    for s in range(0, len(q), 512):
        d2 = np.sum((q[s : s + 512, None, :] - gp[None]) ** 2, axis=-1)
        t[s : s + 512] = grid[np.argmin(d2, axis=1)]
    a = STAR_AMPLITUDE
    for _ in range(iters):
        r, dr, ddr = 1 + a * np.cos(3 * t), -3 * a * np.sin(3 * t), -9 * a * np.cos(3 * t)
        c, sn = np.cos(t), np.sin(t)
        p = np.stack([r * c, r * sn], -1)
        dp = np.stack([dr * c - r * sn, dr * sn + r * c], -1)
        ddp = np.stack([ddr * c - 2 * dr * sn - r * c, ddr * sn + 2 * dr * c - r * sn], -1)
        diff = p - q
        g = np.sum(dp * diff, -1)
        hss = np.sum(dp * dp, -1) + np.sum(ddp * diff, -1)
        step = np.where(hss > 0, g / np.where(hss > 0, hss, 1), 0.0)
        t = t - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return _curve_point(t)


def fibonacci_sphere(n: int) -> PointCloud:
    """Golden-angle lattice on the unit sphere (latitude offset 1/2)."""
    j = np.arange(n)
    z = 1 - (2 * j + 1) / n
    r = np.sqrt(1 - z * z)
    phi = j * math.pi * (3 - math.sqrt(5))
    p = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return PointCloud(p / np.linalg.norm(p, axis=1, keepdims=True))


def random_sphere(n: int, seed: int = 0) -> PointCloud:
    g = np.random.default_rng(seed).standard_normal((n, 3))
    return PointCloud(g / np.linalg.norm(g, axis=1, keepdims=True))


def gbpm(shape: str, dx: float) -> PointCloud:
    """Closest points of the grid nodes lying within ``1.2 dx`` of the manifold.

    The grid has spacing ``dx`` and contains the origin. Projections that
    coincide within 1e-12 are merged.
    """
    if shape == "circle" or shape == "closed_curve":
        d = 2
        reach = 1 + STAR_AMPLITUDE if shape == "closed_curve" else 1.0
    elif shape == "sphere":
        d, reach = 3, 1.0
    else:
        raise SamplerError(f"gbpm sampling is not available for {shape!r}")
    m = int(np.ceil((reach + 2 * GBPM_BAND * dx) / dx))
    ax = np.arange(-m, m + 1) * dx
    nodes = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), -1).reshape(-1, d)
    if shape == "closed_curve":
        rad = np.linalg.norm(nodes, axis=1)
        theta = np.arctan2(nodes[:, 1], nodes[:, 0])
        # cheap prefilter; exact distance below
        cand = nodes[np.abs(rad - curve_radius(theta)) <= 2 * GBPM_BAND * dx + 1e-12]
        proj = _curve_closest(cand)
        keep = np.linalg.norm(proj - cand, axis=1) <= GBPM_BAND * dx
        proj = proj[keep]
    else:
        rad = np.linalg.norm(nodes, axis=1)
        keep = (np.abs(rad - 1) <= GBPM_BAND * dx) & (rad > 0)
        proj = nodes[keep] / rad[keep, None]
    key = np.round(proj / 1e-12).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    return PointCloud(proj[np.sort(first)])


def hemisphere(n: int, mode: str = "uniform", seed: int = 0,
               boundary_points: int | None = None) -> PointCloud:
    """Upper unit hemisphere with equator points tagged as boundary.

    ``boundary_points`` equispaced points sit on the equator (default
    ``max(12, n // 25)``); the remaining points cover ``z > z0`` with ``z0`` half the
    equator spacing, by a golden-angle lattice (``uniform``) or i.i.d.
    area-uniform samples (``random``).
    """
    nb = max(12, n // 25) if boundary_points is None else int(boundary_points)
    ni = n - nb
    if nb < 8:
        raise SamplerError("need at least 8 equator points")
    if ni < 10:
        raise SamplerError("too few interior points")
    z0 = math.pi / nb
    if mode == "uniform":
        j = np.arange(ni)
        z = 1 - (1 - z0) * (j + 0.5) / ni
        phi = j * math.pi * (3 - math.sqrt(5))
    else:
        rng = np.random.default_rng(seed)
        z = rng.uniform(z0, 1, ni)
        phi = rng.uniform(0, 2 * np.pi, ni)
    r = np.sqrt(1 - z * z)
    inner = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    t = 2 * np.pi * np.arange(nb) / nb
    ring = np.column_stack([np.cos(t), np.sin(t), np.zeros(nb)])
    pts = np.concatenate([inner, ring])
    return PointCloud(pts, boundary=np.r_[np.zeros(ni, bool), np.ones(nb, bool)])


def torus(n: int, major: float = TORUS_R, minor: float = TORUS_r) -> PointCloud:
    """Parametric lattice on a torus of radii ``major`` and ``minor``."""
    nv = max(3, int(round(math.sqrt(n * minor / major))))
    nu = max(3, int(round(n / nv)))
    u, v = np.meshgrid(2 * np.pi * np.arange(nu) / nu, 2 * np.pi * np.arange(nv) / nv, indexing="ij")
    u, v = u.ravel(), v.ravel()
    rr = major + minor * np.cos(v)
    return PointCloud(np.column_stack([rr * np.cos(u), rr * np.sin(u), minor * np.sin(v)]))


def distance_to_manifold(shape: str, points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if shape == "line":
        return np.abs(p[:, 1]) + np.maximum(-p[:, 0], 0) + np.maximum(p[:, 0] - 1, 0)
    if shape in ("circle", "sphere"):
        return np.abs(np.linalg.norm(p, axis=1) - 1)
    if shape == "hemisphere":
        return np.abs(np.linalg.norm(p, axis=1) - 1) + np.maximum(-p[:, 2], 0)
    if shape == "closed_curve":
        return np.linalg.norm(_curve_closest(p) - p, axis=1)
    if shape == "torus":
        rho = np.linalg.norm(p[:, :2], axis=1)
        return np.abs(np.hypot(rho - TORUS_R, p[:, 2]) - TORUS_r)
    raise SamplerError(f"no analytic manifold for {shape!r}")


def manufactured_problem(shape: str, case: str, cloud: PointCloud):
    """Source term and exact solution of ``-LB U = source`` on an analytic shape.

    ``circle``/``trig``: ``U = -2 sin t cos t``, source ``-8 sin t cos t``.
    ``sphere``/``coordinate``: ``U = x``, source ``2 x``.
    ``line``/``quadratic``: ``U = x (1 - x) / 2``, source 1, zero at both ends.
    ``hemisphere``/``height``: ``U = z``, source ``2 z``; zero on the equator,
    where the outward normal derivative is -1.
    """
    p = cloud.points
    if shape == "line" and case == "quadratic":
        x = p[:, 0]
        return np.ones(len(x)), x * (1 - x) / 2
    if shape == "circle" and case == "trig":
        t = np.arctan2(p[:, 1], p[:, 0])
        return -8 * np.sin(t) * np.cos(t), -2 * np.sin(t) * np.cos(t)
    if shape == "hemisphere" and case == "height":
        return 2 * p[:, 2], p[:, 2].copy()
    if shape == "sphere" and case == "coordinate":
        return 2 * p[:, 0], p[:, 0].copy()
    raise SamplerError(f"no manufactured case {case!r} for shape {shape!r}")


NEUMANN_DATA = {("hemisphere", "height"): -1.0}


def exact_eigenvalue(shape: str, n: int, bc: str | None = None) -> tuple[float, int]:
    """Exact eigenvalue ``lambda_n`` and its multiplicity.

    sphere: ``n(n+1)``, ``2n+1``; circle: ``n**2``, 2 (1 for n=0);
    hemisphere: Dirichlet ``n(n+1)`` and Neumann ``n(n-1)``, both of
    multiplicity ``n``; line (Dirichlet): ``(n pi)**2``, simple.
    """
    if shape == "line":
        if n < 1 or bc not in (None, "dirichlet"):
            raise SamplerError("line spectra are Dirichlet and indexed from 1")
        return float((n * math.pi) ** 2), 1
    if shape == "sphere":
        return float(n * (n + 1)), 2 * n + 1
    if shape == "circle":
        return float(n * n), 1 if n == 0 else 2
    if shape == "hemisphere":
        if n < 1:
            raise SamplerError("hemisphere eigenvalues are indexed from 1")
        if bc == "dirichlet":
            return float(n * (n + 1)), n
        if bc == "neumann":
            return float(n * (n - 1)), n
        raise SamplerError("hemisphere spectra need bc='dirichlet' or 'neumann'")
    raise SamplerError(f"no exact spectrum for {shape!r}")


def eigen_count(shape: str, n: int, bc: str | None = None) -> int:
    """Number of eigenvalues up to and including ``lambda_n``, with multiplicity."""
    first = 0 if shape in ("sphere", "circle") else 1
    return sum(exact_eigenvalue(shape, j, bc)[1] for j in range(first, n + 1))


def write_cloud(path, cloud: PointCloud, values=None) -> None:
    """Write a cloud in the text format (boundary flag always written)."""
    vals = cloud.values if values is None else np.asarray(values, dtype=float).reshape(-1)
    lines = [f"# dim {cloud.dim}"]
    for i in range(cloud.n):
        cols = [repr(float(c)) for c in cloud.points[i]]
        cols.append("1" if cloud.boundary[i] else "0")
        if vals is not None:
            cols.append(repr(float(vals[i])))
        lines.append(" ".join(cols))
    Path(path).write_text("\n".join(lines) + "\n")


def read_cloud(path, dim: int | None = None) -> PointCloud:
    text = Path(path).read_text()
    rows, lineno = [], []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "dim" and dim is None:
                try:
                    dim = int(parts[1])
                except ValueError:
                    raise CloudFormatError(f"bad dim header {line!r}", no) from None
            continue
        rows.append(line.split())
        lineno.append(no)
    if not rows:
        raise CloudFormatError("no points in file")
    if dim is None:
        ncol = len(rows[0])
        dim = {2: 2, 3: 3, 4: 3, 5: 3}.get(ncol)
        if dim is None:
            raise CloudFormatError(f"cannot infer dimension from {ncol} columns", lineno[0])
    if dim not in (2, 3):
        raise CloudFormatError(f"dimension must be 2 or 3, got {dim}")
    ncol = len(rows[0])
    if ncol < dim or ncol > dim + 2:
        raise CloudFormatError(f"expected {dim} to {dim + 2} columns, got {ncol}", lineno[0])
    pts = np.empty((len(rows), dim))
    flags = np.zeros(len(rows), dtype=bool)
    vals = np.empty(len(rows)) if ncol == dim + 2 else None
    for r, (cols, no) in enumerate(zip(rows, lineno)):
        if len(cols) != ncol:
            raise CloudFormatError(f"expected {ncol} columns, got {len(cols)}", no)
        try:
            pts[r] = [float(c) for c in cols[:dim]]
            if ncol > dim:
                flag = int(cols[dim])
                if flag not in (0, 1):
                    raise ValueError
                flags[r] = bool(flag)
            if vals is not None:
                vals[r] = float(cols[dim + 1])
        except ValueError:
            raise CloudFormatError(f"cannot parse {' '.join(cols)!r}", no) from None
        if not np.all(np.isfinite(pts[r])):
            raise CloudFormatError("non-finite coordinate", no)
    return PointCloud(pts, boundary=flags, values=vals)
