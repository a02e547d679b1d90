import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from levelclust.errors import InvalidArgument
from levelclust.kde import fit
from levelclust.synthetic import (Gaussian, PointMass, SyntheticSpec, UniformBox, gaussian,
                                  generate, geometric_density, level_set_measure, level_set_member,
                                  min_component_distance, mollified_density, named_spec,
                                  sharp_clusters, stick_spiral, support_member, two_moons,
                                  two_uniform)


def test_empty_sample():
    s = generate(sharp_clusters(), 0, seed=0)
    assert s.points.n == 0 and s.labels.size == 0


def test_point_mass_draws_exact():
    spec = SyntheticSpec(((1.0, PointMass((0.1, -2.3))),))
    pts = generate(spec, 50, seed=3).points.points
    assert pts.tobytes() == np.tile([0.1, -2.3], (50, 1)).tobytes()


def test_sharp_component_frequencies():
    n = 30_000
    labels = generate(sharp_clusters(), n, seed=0).labels
    se = math.sqrt((1 / 3) * (2 / 3) / n)
    for k in (1, 2, 3):
        assert abs(np.mean(labels == k) - 1 / 3) <= 3 * se


def test_generate_is_pure():
    a = generate(stick_spiral(), 300, seed=8)
    b = generate(stick_spiral(), 300, seed=8)
    assert a.points.points.tobytes() == b.points.points.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    c = generate(stick_spiral(), 300, seed=9)
    assert a.points.points.tobytes() != c.points.points.tobytes()


def test_moons_padded_to_twenty():
    pts = generate(two_moons(), 200, seed=0).points.points
    assert pts.shape == (200, 20)
    assert np.all(pts[:, 2:] == 0.0)


def test_geometric_density_sharp():
    spec = sharp_clusters()
    assert geometric_density(spec, 0.0) == math.inf
    assert geometric_density(spec, 5.0) == pytest.approx(1 / 3, abs=1e-15)
    assert geometric_density(spec, 3.0) == 0.0


def test_sharp_level_set():
    spec = sharp_clusters()
    x = np.array([-5.5, -5.0, -4.5, -4.49, 0.0, 1e-9, 2.0, 4.5, 5.5, 5.51])
    want = [True, True, True, False, True, False, False, True, True, False]
    assert level_set_member(spec, 0.04, x).tolist() == want


def test_gaussian_level_set_is_unit_interval():
    spec = gaussian()
    lam = stats.norm.pdf(1.0)
    x = np.linspace(-3, 3, 6001)
    got = level_set_member(spec, lam, x)
    inside = np.abs(x) <= 1 - 1e-9
    outside = np.abs(x) >= 1 + 1e-9
    assert got[inside].all() and not got[outside].any()
    assert level_set_measure(spec, lam) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("make", [sharp_clusters, two_uniform, stick_spiral, gaussian])
def test_level_zero_is_support(make):
    spec = make()
    rng = np.random.default_rng(0)
    probes = rng.uniform(-7, 7, (10_000, spec.dim))
    # mix in sample points so both outcomes are exercised
    probes[:2000] = generate(spec, 2000, seed=1).points.points
    np.testing.assert_array_equal(level_set_member(spec, 0.0, probes), support_member(spec, probes))


def test_mollified_point_mass_exact():
    spec = SyntheticSpec(((1.0, PointMass((0.0,))),))
    val, se = mollified_density(spec, "spherical", 0.04, [0.0], M=10, seed=0)
    assert val[0] == 12.5 and se[0] == 0.0


def test_mollified_uniform_against_quadrature():
    spec = SyntheticSpec(((1.0, UniformBox((0.0,), (1.0,))),))
    h, x = 0.1, 0.5
    val, se = mollified_density(spec, "biweight", h, [x], M=200_000, seed=1)
    c = integrate.quad(lambda r: (1 - r * r) ** 2, -1, 1)[0]
    want = integrate.quad(lambda y: (1 - ((x - y) / h) ** 2) ** 2 / (c * h), x - h, x + h)[0]
    assert abs(val[0] - want) <= 3 * se[0]


def test_mollified_sharp_spike():
    val, _ = mollified_density(sharp_clusters(), "spherical", 0.04, [0.0, -5.0, 5.0], M=20_000, seed=0)
    assert val[0] == pytest.approx(12.5 / 3, rel=1e-12)
    assert val[1:] == pytest.approx([1 / 3, 1 / 3], rel=0.05)


def test_density_integrates_to_one():
    spec = two_uniform()
    x = np.linspace(-1, 7, 800_001)
    assert abs(np.trapezoid(geometric_density(spec, x), x) - 1) <= 1e-3
    g2 = SyntheticSpec(((1.0, Gaussian((0.0, 1.0), (1.0, 0.5))),))
    xs = np.linspace(-8, 8, 1201)
    ys = np.linspace(-3, 5, 801)
    X, Y = np.meshgrid(xs, ys)
    p = geometric_density(g2, np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    assert abs(np.trapezoid(np.trapezoid(p, xs, axis=1), ys) - 1) <= 1e-3


def test_sandwich_on_grid():
    spec, lam, h = two_uniform(), 0.3, 0.05
    x = np.linspace(-0.5, 6.5, 10_000)
    est = fit(generate(spec, 2000, seed=0).points, "spherical", h)
    ph, _ = mollified_density(spec, "spherical", h, x, M=20_000, seed=0)
    p_hat = est.evaluate_batch(x.reshape(-1, 1))
    eps = float(np.max(np.abs(p_hat - ph)))
    assert np.all(p_hat[ph >= lam + eps] >= lam)
    # away from the box edges p_h equals p, so the same holds against p itself
    deep = np.minimum(np.abs(x - 0.5), np.abs(x - 5.5)) <= 0.5 - h
    strong = deep & (geometric_density(spec, x) >= lam + eps)
    assert strong.sum() > 1000
    assert np.all(p_hat[strong] >= lam)


@pytest.mark.parametrize("make", [sharp_clusters, two_uniform, stick_spiral, two_moons])
def test_components_disjoint(make):
    spec = make()
    assert abs(spec.weights.sum() - 1) <= 1e-12
    assert min_component_distance(spec, 10_000, seed=0) > 0


def test_json_round_trip():
    for name in ("sharp-fig1", "two-uniform", "gaussian", "stick-spiral", "two-moons"):
        spec = named_spec(name)
        back = SyntheticSpec.from_json(json.loads(json.dumps(spec.to_json())))
        assert back == spec


def test_bad_specs():
    with pytest.raises(InvalidArgument):
        SyntheticSpec(((0.5, PointMass((0.0,))),))
    with pytest.raises(InvalidArgument):
        SyntheticSpec.from_json({"components": [{"weight": 1.0, "shape": "torus"}]})
    with pytest.raises(InvalidArgument):
        named_spec("nope")
    with pytest.raises(InvalidArgument):
        generate(two_uniform(), -1, 0)
