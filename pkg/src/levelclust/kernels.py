"""Radial kernels supported on the closed unit ball."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import pi

import numpy as np
from scipy import integrate

from .errors import InvalidArgument

KINDS = ("spherical", "biweight", "triweight", "truncated_gaussian")


def unit_ball_volume(d: int) -> float:
    """``pi^(d/2) / Gamma(d/2 + 1)`` via ``v_d = 2 pi v_(d-2) / d`` (exact for d=1, 2)."""
    v = 2.0 if d % 2 else 1.0
    for k in range(2 + d % 2, d + 1, 2):
        v *= 2.0 * pi / k
    return v


def _profile(kind, r):
    r = np.asarray(r, dtype=np.float64)
    inside = r <= 1.0
    if kind == "spherical":
        out = inside.astype(np.float64)
    elif kind == "biweight":
        out = np.where(inside, (1.0 - r * r) ** 2, 0.0)
    elif kind == "triweight":
        out = np.where(inside, (1.0 - r * r) ** 3, 0.0)
    elif kind == "truncated_gaussian":
        out = np.where(inside, np.exp(-0.5 * r * r), 0.0)
    else:
        raise InvalidArgument(f"unknown kernel kind {kind!r}; expected one of {KINDS}")
    return out


@lru_cache(maxsize=None)
def normalizing_constant(kind: str, d: int) -> float:
    """Integral of the kernel over R^d.

    For the spherical kernel this is the unit-ball volume; otherwise the
    radial integral ``v_d * d * int_0^1 K(r) r^(d-1) dr`` by adaptive
    quadrature.
    """
    if d < 1:
        raise InvalidArgument("dimension must be >= 1")
    if kind not in KINDS:
        raise InvalidArgument(f"unknown kernel kind {kind!r}; expected one of {KINDS}")
    vd = unit_ball_volume(d)
    if kind == "spherical":
        return vd
    radial, _ = integrate.quad(
        lambda r: float(_profile(kind, r)) * r ** (d - 1), 0.0, 1.0,
        epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return vd * d * radial


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.d < 1:
            raise InvalidArgument("dimension must be >= 1")

    @property
    def c_d(self) -> float:
        return normalizing_constant(self.kind, self.d)

    @property
    def smooth(self) -> bool:
        # the indicator kernel is not even continuous
        return self.kind != "spherical"

    def __call__(self, r):
        return kernel_value(self, r)


def kernel_value(spec: KernelSpec, r):
    """Profile value K(r) at scaled radius ``r = |u|``; zero for r > 1."""
    arr = np.asarray(r, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise InvalidArgument("scaled radius must be nonnegative")
    out = _profile(spec.kind, arr)
    return float(out) if out.ndim == 0 else out


def as_kernel(kernel, d: int) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        if kernel.d != d:
            raise InvalidArgument(f"kernel built for d={kernel.d}, data has d={d}")
        return kernel
    return KernelSpec(str(kernel), d)
