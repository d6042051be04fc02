import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pointlb.geometry import GeometryError, PointCloud
from pointlb.sampling import (
    SHAPES,
    CloudFormatError,
    SamplerError,
    SamplerSpec,
    distance_to_manifold,
    eigen_count,
    exact_eigenvalue,
    gbpm,
    hemisphere,
    manufactured_problem,
    read_cloud,
    sample,
    write_cloud,
)

SPECS = [
    SamplerSpec("line", "uniform", n=50),
    SamplerSpec("line", "random", n=50, seed=2),
    SamplerSpec("circle", "uniform", n=300),
    SamplerSpec("circle", "random", n=300, seed=1),
    SamplerSpec("circle", "gbpm", dx=0.05),
    SamplerSpec("closed_curve", "uniform", n=300),
    SamplerSpec("closed_curve", "random", n=300, seed=3),
    SamplerSpec("closed_curve", "gbpm", dx=0.05),
    SamplerSpec("sphere", "uniform", n=1000),
    SamplerSpec("sphere", "fibonacci", n=1000),
    SamplerSpec("sphere", "random", n=1000, seed=4),
    SamplerSpec("sphere", "gbpm", dx=0.1),
    SamplerSpec("hemisphere", "uniform", n=1000),
    SamplerSpec("hemisphere", "random", n=1000, seed=5),
    SamplerSpec("torus", "uniform", n=800),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.shape}-{s.mode}")
def test_samplers_lie_on_manifold(spec):
    c = sample(spec)
    assert np.max(distance_to_manifold(spec.shape, c.points)) < 1e-12
    if spec.n is not None and spec.shape != "torus":
        assert c.n == spec.n


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.shape}-{s.mode}")
def test_samplers_are_deterministic(spec):
    a, b = sample(spec), sample(spec)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.boundary, b.boundary)


@given(st.sampled_from(["circle", "sphere", "hemisphere", "line", "closed_curve"]),
       st.integers(0, 2**31 - 1))
def test_seeded_random_sampling_reproducible(shape, seed):
    spec = SamplerSpec(shape, "random", n=120, seed=seed)
    assert np.array_equal(sample(spec).points, sample(spec).points)
    other = SamplerSpec(shape, "random", n=120, seed=seed + 1)
    assert not np.array_equal(sample(spec).points, sample(other).points)


def test_fibonacci_pole_and_spacing():
    c = sample(SamplerSpec("sphere", "fibonacci", n=2000))
    d, _ = c.tree.query(c.points, k=2)
    nn = d[:, 1]
    assert nn.max() / nn.min() < 2.0


def test_gbpm_circle_properties():
    c = gbpm("circle", 0.05)
    pts = c.points
    assert len(np.unique(np.round(pts / 1e-12), axis=0)) == c.n
    d, _ = c.tree.query(pts, k=2)
    # closest-point projection clusters points: spacing is far from uniform
    assert d[:, 1].max() / d[:, 1].min() > 5
    assert 200 < c.n < 400


def test_hemisphere_boundary_ring():
    c = hemisphere(1000)
    b = c.boundary_ids
    assert len(b) == 40
    assert np.allclose(c.points[b, 2], 0.0)
    assert np.all(c.points[c.interior_ids, 2] > 0)
    c2 = hemisphere(1000, boundary_points=64)
    assert len(c2.boundary_ids) == 64


@pytest.mark.parametrize("kwargs", [
    dict(shape="cube"),
    dict(shape="circle", mode="fibonacci", n=100),
    dict(shape="circle", mode="gbpm"),
    dict(shape="circle", mode="uniform", n=5),
    dict(shape="file", mode="file"),
])
def test_sampler_spec_errors(kwargs):
    with pytest.raises(SamplerError):
        SamplerSpec(**kwargs)


def test_manufactured_values():
    c = PointCloud([[np.cos(np.pi / 4), np.sin(np.pi / 4)], [1.0, 0.0]])
    src, exact = manufactured_problem("circle", "trig", c)
    assert np.isclose(src[0], -4) and np.isclose(exact[0], -1)
    s = PointCloud([[0.0, 0.0, 1.0], [1.0, 0, 0], [0, 1.0, 0], [0, 0, -1.0]])
    src, exact = manufactured_problem("sphere", "coordinate", s)
    assert src[0] == 0 and exact[0] == 0 and src[1] == 2
    with pytest.raises(SamplerError):
        manufactured_problem("sphere", "trig", s)


@pytest.mark.parametrize("n", [100, 1000, 5000])
def test_circle_rhs_compatible(n):
    c = sample(SamplerSpec("circle", "uniform", n=n))
    src, _ = manufactured_problem("circle", "trig", c)
    assert abs(src.mean()) < 10.0 / n


def test_exact_eigenvalues():
    assert exact_eigenvalue("sphere", 4) == (20.0, 9)
    assert exact_eigenvalue("circle", 0) == (0.0, 1)
    assert exact_eigenvalue("hemisphere", 5, "dirichlet") == (30.0, 5)
    assert exact_eigenvalue("hemisphere", 6, "neumann") == (30.0, 6)
    assert exact_eigenvalue("line", 2)[0] == pytest.approx(4 * np.pi**2)
    assert eigen_count("sphere", 8) == 81
    assert eigen_count("hemisphere", 5, "dirichlet") == 15
    with pytest.raises(SamplerError):
        exact_eigenvalue("hemisphere", 2)
    with pytest.raises(SamplerError):
        exact_eigenvalue("torus", 1)


@given(arrays(float, (30, 3), elements=st.floats(-1e6, 1e6, allow_subnormal=True), unique=True),
       st.booleans())
def test_cloud_round_trip(tmp_path_factory, pts, with_values):
    if len(np.unique(pts, axis=0)) < len(pts):
        return
    path = tmp_path_factory.mktemp("rt") / "cloud.txt"
    flags = np.arange(30) % 3 == 0
    vals = np.linspace(-1, 1, 30) if with_values else None
    write_cloud(path, PointCloud(pts, boundary=flags), vals)
    back = read_cloud(path)
    assert np.array_equal(back.points, pts)
    assert np.array_equal(back.boundary, flags)
    if with_values:
        assert np.array_equal(back.values, vals)


def test_read_three_lines(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# a comment\n0 0 1\n1 0 0\n\n0 1 0\n")
    c = read_cloud(p)
    assert c.n == 3 and c.dim == 3


def test_read_reports_bad_line(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# dim 3\n0 0 1\n0.0 0.0\n")
    with pytest.raises(CloudFormatError) as info:
        read_cloud(p)
    assert info.value.line == 3


@pytest.mark.parametrize("text", ["", "# only comments\n", "1 2 x\n", "1 2 3 4 5 6 7\n"])
def test_read_rejects_malformed(tmp_path, text):
    p = tmp_path / "c.txt"
    p.write_text(text)
    with pytest.raises(CloudFormatError):
        read_cloud(p)


def test_read_rejects_duplicates(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("0 0 1\n0 0 1\n1 0 0\n")
    with pytest.raises(GeometryError):
        read_cloud(p)


def test_every_shape_has_a_mode():
    assert all(SHAPES[s] for s in SHAPES)


def test_small_hemisphere_rejected():
    assert len(hemisphere(150).boundary_ids) == 12
    with pytest.raises(SamplerError):
        hemisphere(200, boundary_points=4)
