import math

import mpmath
import numpy as np
import pytest

from levelclust.cluster_graph import extract_clusters
from levelclust.dataset import PointSet
from levelclust.errors import InvalidArgument, NumericalSupportError, SelectionError
from levelclust.excess_mass import (VolumeEstimate, adaptive_grid, empirical_excess_mass,
                                    estimate_volume, select_bandwidth_excess_mass)
from levelclust.kde import fit
from levelclust.stability import default_grid
from levelclust.synthetic import generate, two_uniform


def grid_volume(est, lam, lo, hi, step=1e-4):
    """Oracle: Lebesgue measure of {p_h >= lam} by midpoint grid quadrature."""
    x = np.arange(lo + step / 2, hi, step)
    v = est.evaluate_batch(x.reshape(-1, 1))
    return float(np.count_nonzero(v >= lam) * step) if lam > 0 else float(np.count_nonzero(v > 0) * step)


def union_length(centers, h):
    """Exact length of the union of [c-h, c+h]."""
    c = np.sort(np.asarray(centers).ravel())
    total, lo, hi = 0.0, c[0] - h, c[0] + h
    for x in c[1:]:
        if x - h > hi:
            total += hi - lo
            lo = x - h
        hi = max(hi, x + h)
    return total + hi - lo


@pytest.fixture(scope="module")
def unif200():
    return PointSet(np.random.default_rng(11).uniform(0, 1, (200, 1)))


def test_volume_empty_level(unif200):
    est = fit(unif200, "spherical", 0.1)
    pilot = fit(unif200, "spherical", 0.5)
    assert estimate_volume(est, est.at_data().max() * 2, pilot, 1000, 0).value == 0.0


def test_volume_matches_quadrature(unif200):
    est = fit(unif200, "spherical", 0.1)
    pilot = fit(unif200, "spherical", 0.5)
    vol = estimate_volume(est, 0.5, pilot, 40_000, seed=1)
    truth = grid_volume(est, 0.5, -0.2, 1.2)
    assert abs(vol.value - truth) <= 0.02 * truth
    assert vol.M == 40_000 and vol.pilot_bandwidth == 0.5


def test_volume_at_zero_level(unif200):
    h = 0.004
    est = fit(unif200, "spherical", h)
    vol = estimate_volume(est, 0.0, fit(unif200, "spherical", 0.05), 40_000, seed=2)
    truth = union_length(unif200.points, h)
    assert abs(vol.value - truth) <= 3 * vol.std_error


def test_volume_unbiased_over_seeds(unif200):
    est = fit(unif200, "spherical", 0.1)
    pilot = fit(unif200, "spherical", 0.5)
    truth = grid_volume(est, 0.5, -0.2, 1.2, step=1e-5)
    vals, ses = [], []
    for seed in range(200):
        v = estimate_volume(est, 0.5, pilot, 2000, seed)
        vals.append(v.value)
        ses.append(v.std_error)
    pooled = math.sqrt(np.mean(np.square(ses)) / len(vals))
    assert abs(np.mean(vals) - truth) <= 3 * pooled


def test_volume_errors(unif200):
    est = fit(unif200, "spherical", 0.1)
    with pytest.raises(InvalidArgument):
        estimate_volume(est, 0.5, fit(unif200, "spherical", 0.05), 100, 0)
    # pilot density ~2e-301 (below the 1e-300 floor) inside a level set
    data = PointSet(np.zeros((5, 20)))
    with pytest.raises(NumericalSupportError):
        estimate_volume(fit(data, "spherical", 1e15), 0.0, fit(data, "spherical", 1.3e15), 10_000, 0)


def test_empirical_excess_mass_by_hand():
    est = fit(PointSet([[0.0], [0.2], [3.0], [3.1]]), "spherical", 0.5)
    # {p >= 0.5} = [-0.3, 0.5] u [2.6, 3.5], length 1.7
    vol = estimate_volume(est, 0.5, fit(est.data, "spherical", 2.0), 200_000, seed=0)
    assert abs(vol.value - 1.7) <= 3 * vol.std_error
    z = PointSet([[0.1], [3.4], [1.0]])
    got = empirical_excess_mass(est, 0.5, z, VolumeEstimate(1.7, 1, 2.0, 0.0))
    assert got == pytest.approx(2 / 3 - 0.5 * 1.7, abs=1e-15)


def test_empirical_excess_mass_trivial_cases():
    est = fit(PointSet([[0.0], [1.0]]), "spherical", 0.1)
    z = PointSet([[0.0], [0.5], [1.05], [7.0]])
    assert empirical_excess_mass(est, 0.0, z, None) == 0.5
    assert empirical_excess_mass(est, 100.0, z, VolumeEstimate(0.0, 1, 1.0, 0.0)) == 0.0
    with pytest.raises(InvalidArgument):
        empirical_excess_mass(est, 0.1, PointSet(np.zeros((0, 1))), None)


def test_selector_single_bandwidth(unif200):
    c = select_bandwidth_excess_mass(unif200, [0.2], 0.5, M=1000, seed=0)
    assert c.selected == 0.2


def test_selector_lambda_zero_smallest_full_coverage(unif200):
    grid = np.geomspace(1e-4, 0.5, 30)
    c = select_bandwidth_excess_mass(unif200, grid, 0.0, seed=3)
    full = np.flatnonzero(c.values == 1.0)
    assert full.size and c.selected == grid[full[0]]
    assert np.all(np.diff(c.values) >= 0)  # coverage grows with h
    assert np.all(c.values <= 1.0)


def test_selector_level_too_high(unif200):
    with pytest.raises(SelectionError) as info:
        select_bandwidth_excess_mass(unif200, [0.05, 0.1], 1e6, M=500, seed=0)
    curve = info.value.curve
    assert curve is not None and not curve.defined.any()
    assert np.all(curve.values == 0.0)


def test_selector_grid_validation(unif200):
    for bad in ([], [0.1, 0.1], [0.2, 0.1], [-1.0, 0.1]):
        with pytest.raises(InvalidArgument):
            select_bandwidth_excess_mass(unif200, bad, 0.1)


def test_selector_deterministic_and_recovers_two_clusters():
    ps = generate(two_uniform(), 200, seed=5).points
    a = select_bandwidth_excess_mass(ps, default_grid(ps), 0.3, seed=5)
    b = select_bandwidth_excess_mass(ps, default_grid(ps), 0.3, seed=5)
    assert a.values.tobytes() == b.values.tobytes() and a.selected == b.selected
    assert np.all(a.values <= 1.0)
    assert extract_clusters(fit(ps, "spherical", a.selected), 0.3, 0.25).k_hat == 2


# --- adaptive grid --------------------------------------------------------

def mp_grid(n, d):
    """Independent re-computation of the adaptive grid at 50 digits."""
    mpmath.mp.dps = 50
    n = mpmath.mpf(n)
    a = mpmath.log(n) / n
    W = mpmath.log(2) / (mpmath.log(n) - mpmath.log(mpmath.log(n)))
    hs = []
    for theta in range(1, d + 1):
        A = 2 * abs(mpmath.log(a)) * a ** (mpmath.mpf(theta) / (2 * theta + d)) * theta ** 2 / mpmath.mpf(2 * theta + d) ** 2
        delta = a ** (mpmath.mpf(theta) / d) / (2 * A)
        ups = 2 * mpmath.mpf(theta) ** 2 / (d ** 2 * W) - mpmath.mpf(2 * theta) / d - 1
        N = max(int(mpmath.floor(ups / delta)), 0)
        for j in range(1, N + 1):
            g = (j - 1) * delta
            hs.append(a ** ((g + 1) / (2 * theta + d * (g + 1))))
    hs = sorted(hs)
    out = []
    for h in hs:
        if not out or h - out[-1] > mpmath.mpf("1e-12") * h:
            out.append(h)
    return [float(h) for h in out]


@pytest.mark.parametrize("n, d", [(100, 1), (1000, 2), (5000, 3)])
def test_adaptive_grid_matches_mp(n, d):
    params, hs = adaptive_grid(n, d)
    want = np.array(mp_grid(n, d))
    assert hs.shape == want.shape and hs.size > 0
    assert np.max(np.abs(hs - want) / want) <= 1e-12
    assert np.all((hs > 0) & (hs < 1)) and np.all(np.diff(hs) > 0)
    # theta = d, gamma = 0 entry
    a = math.log(n) / n
    assert np.min(np.abs(hs - a ** (1 / (3 * d)))) <= 1e-12 * a ** (1 / (3 * d))
    assert params.a_n == pytest.approx(a, rel=1e-15)


def test_adaptive_grid_cap_and_errors():
    _, full = adaptive_grid(5000, 3)
    _, capped = adaptive_grid(5000, 3, max_size=10)
    assert 1 < capped.size <= 10
    assert set(capped.tolist()) <= set(full.tolist())
    assert capped[0] == full[0] and capped[-1] == full[-1]
    with pytest.raises(InvalidArgument):
        adaptive_grid(2, 1)
