import math

import mpmath
import numpy as np
import pytest

from levelclust.errors import InvalidArgument
from levelclust.kernels import KINDS, KernelSpec, kernel_value, normalizing_constant, unit_ball_volume


def _closed_form_c(kind, d):
    """Independent c_d: the radial integral in closed form (Beta / incomplete gamma)."""
    vd = mpmath.pi ** (mpmath.mpf(d) / 2) / mpmath.gamma(mpmath.mpf(d) / 2 + 1)
    half = mpmath.mpf(d) / 2
    if kind == "spherical":
        radial = 1 / mpmath.mpf(d)
    elif kind == "biweight":
        radial = mpmath.beta(half, 3) / 2
    elif kind == "triweight":
        radial = mpmath.beta(half, 4) / 2
    else:
        radial = 2 ** (half - 1) * mpmath.gammainc(half, 0, mpmath.mpf(1) / 2)
    return float(vd * d * radial)


def test_profile_examples():
    assert kernel_value(KernelSpec("spherical", 1), 0.5) == 1.0
    assert kernel_value(KernelSpec("biweight", 1), 1.0) == 0.0
    for kind in KINDS:
        assert kernel_value(KernelSpec(kind, 3), 2.0) == 0.0
    assert kernel_value(KernelSpec("spherical", 2), 1.0) == 1.0  # closed ball
    assert kernel_value(KernelSpec("truncated_gaussian", 1), 1.0) == pytest.approx(math.exp(-0.5))


def test_negative_radius_rejected():
    with pytest.raises(InvalidArgument):
        kernel_value(KernelSpec("biweight", 2), -0.1)
    with pytest.raises(InvalidArgument):
        KernelSpec("epanechnikov", 1)


def test_constant_examples():
    assert normalizing_constant("spherical", 1) == 2.0
    assert normalizing_constant("spherical", 2) == pytest.approx(math.pi, rel=1e-15)
    assert normalizing_constant("biweight", 1) == pytest.approx(16 / 15, rel=1e-12)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 20])
def test_constant_matches_closed_form(kind, d):
    assert normalizing_constant(kind, d) == pytest.approx(_closed_form_c(kind, d), rel=1e-10)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_self_normalization(kind, d):
    # integral of K/c_d over R^d, by a fine radial Riemann sum independent of quad
    r = (np.arange(200_000) + 0.5) / 200_000
    radial = np.mean(kernel_value(KernelSpec(kind, d), r) * r ** (d - 1))
    total = unit_ball_volume(d) * d * radial / normalizing_constant(kind, d)
    assert abs(total - 1.0) < 1e-8


@pytest.mark.parametrize("kind", KINDS)
def test_nonincreasing(kind):
    r = np.linspace(0, 1.5, 10_000)
    v = kernel_value(KernelSpec(kind, 2), r)
    assert np.all(np.diff(v) <= 0)
    assert np.all(v >= 0) and v[0] == 1.0
