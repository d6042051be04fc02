"""Property suite; runs on its own with ``pytest tests/test_properties.py``."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pointlb.boundary import boundary_frame, dirichlet
from pointlb.geometry import pca_axes
from pointlb.laplacian import discretize
from pointlb.localfit import function_fit_operator, monomials
from pointlb.sampling import SamplerSpec, hemisphere, sample
from pointlb.solver import rank_deficiency_fix, solve

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(5, 30), st.floats(1e-3, 10.0), st.sampled_from(["center", "unit"]),
       arrays(float, 6, elements=st.floats(-10, 10)))
def test_fit_reproduces_every_quadratic(seed, k, scale, mode, coef):
    rng = np.random.default_rng(seed)
    tc = rng.uniform(-scale, scale, (k + 1, 2))
    tc[0] = 0.0
    W = function_fit_operator(tc, mode)
    if W.linear_fallback:
        return
    M = monomials(tc)
    # each monomial separately, then a random combination
    assert np.allclose(W.weights @ M, np.eye(6), atol=1e-7 / min(scale, 1.0) ** 2)
    assert np.allclose(W @ (M @ coef), coef, atol=1e-6 * (1 + np.abs(coef).max()) / min(scale, 1.0) ** 2)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(4, 40), st.sampled_from([2, 3]))
def test_pca_frames_orthonormal(seed, k, d):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(k, d)) * np.geomspace(1.0, 0.05, d)
    axes, w = pca_axes(pts)
    assert np.allclose(axes @ axes.T, np.eye(d), atol=1e-10)
    assert np.all(np.diff(w) <= 1e-12 * w[0])


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(0, 10_000))
def test_reflection_involution(seed, pick):
    c = hemisphere(400)
    j = c.boundary_ids[pick % len(c.boundary_ids)]
    fr = boundary_frame(c, j)
    q = np.random.default_rng(seed).normal(size=(8, 3))
    assert np.allclose(fr.reflect(fr.reflect(q)), q, atol=1e-12)
    assert np.allclose(fr.reflect(fr.origin), fr.origin)


def _oracle_system(kind, n, seed):
    if kind == "line":
        c = sample(SamplerSpec("line", "uniform", n=n))
        A, b, _ = discretize(c, condition=dirichlet(0.0)).reduced_system(1.0)
        return A, b
    if kind == "hemisphere":
        c = hemisphere(n)
        A, b, _ = discretize(c, condition=dirichlet(0.0)).reduced_system(2 * c.points[:, 2])
        return A, b
    c = sample(SamplerSpec("sphere", "fibonacci", n=n))
    b = np.random.default_rng(seed).standard_normal(n)
    reg = rank_deficiency_fix(discretize(c).operator, b, warn_tol=np.inf)
    return reg.matrix, reg.rhs


@settings(max_examples=12, deadline=None)
@given(st.sampled_from(["line", "hemisphere", "sphere"]), st.integers(150, 500), seeds,
       st.sampled_from(["amg", "gmres", "direct"]))
def test_solvers_match_dense_oracle(kind, n, seed, method):
    A, b = _oracle_system(kind, n, seed)
    ref = np.linalg.solve(A.toarray(), b)
    x, _ = solve(A, b, method, tol=1e-11)
    assert np.max(np.abs(x - ref)) <= 1e-7 * max(1.0, np.abs(ref).max())


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([("line", "random"), ("circle", "random"), ("closed_curve", "random"),
                        ("sphere", "random"), ("hemisphere", "random")]),
       st.integers(50, 400), seeds)
def test_seeded_samplers_reproducible(shape_mode, n, seed):
    spec = SamplerSpec(*shape_mode, n=n, seed=seed)
    a, b = sample(spec), sample(spec)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.boundary, b.boundary)
