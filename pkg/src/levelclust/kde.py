"""Kernel density estimate with compactly supported kernels.

Only data points within ``h`` of a query contribute, so evaluation goes
through a fixed-radius spatial index built once at fit time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import KDE_DRAW, make_rng
from .dataset import PointSet
from .errors import InvalidArgument
from .kernels import KernelSpec, as_kernel
from .spatial import SpatialIndex, build_index

_CHUNK = 4096


def level_set_mask(values, lam):
    """Membership in the lambda-level set of a density.

    For ``lam > 0`` this is ``values >= lam``.  At ``lam == 0`` the level set
    is read as the support, ``values > 0``; otherwise it would be all of R^d.
    """
    values = np.asarray(values)
    if lam > 0:
        return values >= lam
    return values > 0


def _grouped_sums(qi, w, m):
    """Per-query Neumaier-compensated sums of ``w``.

    ``qi`` must be sorted; within each query the terms are added in the
    order given (ascending data index).
    """
    out = np.zeros(m)
    if qi.size == 0:
        return out
    counts = np.bincount(qi, minlength=m)
    starts = np.cumsum(counts) - counts
    # process queries with the most terms first so each step is a prefix
    by_count = np.argsort(-counts, kind="stable")
    counts_sorted = counts[by_count]
    starts_sorted = starts[by_count]
    total = np.zeros(m)
    comp = np.zeros(m)
    for k in range(int(counts_sorted[0])):
        active = int(np.searchsorted(-counts_sorted, -k, side="left"))
        term = w[starts_sorted[:active] + k]
        s = total[:active]
        t = s + term
        big = np.abs(s) >= np.abs(term)
        comp[:active] += np.where(big, (s - t) + term, (term - t) + s)
        total[:active] = t
    out[by_count] = total + comp
    return out


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """Immutable fitted estimate ``p_h``; see :func:`fit`."""

    data: PointSet
    kernel: KernelSpec
    h: float
    index: SpatialIndex

    @property
    def n(self):
        return self.data.n

    @property
    def d(self):
        return self.data.d

    @property
    def scale(self):
        """``1 / (n c_d h^d)``; saturates to 0 or inf instead of raising."""
        return self.upper_bound / self.n

    @property
    def upper_bound(self):
        """``sup_x p_h(x) <= K(0) / (c_d h^d)``."""
        with np.errstate(over="ignore", divide="ignore"):
            hd = np.power(np.float64(self.h), self.d)
            return float(np.float64(1.0) / (self.kernel.c_d * hd))

    def _check(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if pts.size == self.d else pts.reshape(-1, 1)
        if pts.ndim != 2 or (pts.shape[0] and pts.shape[1] != self.d):
            raise InvalidArgument(
                f"query dimension {pts.shape[-1]} does not match data dimension {self.d}"
            )
        return pts

    def kernel_sums(self, points):
        """Unscaled sums ``sum_i K(|x - X_i| / h)`` per query row."""
        pts = self._check(points)
        m = pts.shape[0]
        out = np.zeros(m)
        for lo in range(0, m, _CHUNK):
            chunk = pts[lo:lo + _CHUNK]
            if self.kernel.kind == "spherical":
                out[lo:lo + len(chunk)] = self.index.count_within(chunk, self.h)
            else:
                qi, _, dist = self.index.pairs_within(chunk, self.h)
                w = self.kernel(np.minimum(dist / self.h, 1.0))
                out[lo:lo + len(chunk)] = _grouped_sums(qi, w, len(chunk))
        return out

    def evaluate_batch(self, points):
        """Density at each row of ``points``, in input order."""
        return self.kernel_sums(points) * self.scale

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.d:
            raise InvalidArgument(
                f"query dimension {x.size} does not match data dimension {self.d}"
            )
        return float(self.evaluate_batch(x.reshape(1, -1))[0])

    __call__ = evaluate_batch

    def at_data(self):
        """Density at the sample points themselves (cached)."""
        cached = self.__dict__.get("_at_data")
        if cached is None:
            cached = self.evaluate_batch(self.data.points)
            cached.setflags(write=False)
            object.__setattr__(self, "_at_data", cached)
        return cached


def fit(ps, kernel="spherical", h=1.0, index="auto") -> DensityEstimate:
    """Fit ``p_h(x) = (1/n) sum_i K(|x - X_i| / h) / (c_d h^d)``."""
    if not isinstance(ps, PointSet):
        ps = PointSet(ps)
    if ps.n == 0:
        raise InvalidArgument("cannot fit a density to an empty sample")
    h = float(h)
    if not (h > 0 and np.isfinite(h)):
        raise InvalidArgument(f"bandwidth must be positive and finite, got {h}")
    kernel = as_kernel(kernel, ps.d)
    idx = index if isinstance(index, SpatialIndex) else build_index(ps.points, h, index)
    return DensityEstimate(ps, kernel, h, idx)


def unit_ball_draws(rng, m, d, kernel: KernelSpec | None = None):
    """``m`` draws from the kernel's density on the unit ball.

    Uniform on the ball for the spherical kernel (Gaussian direction times
    ``U^(1/d)`` radius); otherwise rejection from the uniform ball, using
    ``sup K = K(0) = 1`` as the envelope.
    """
    def uniform(k):
        g = rng.standard_normal((k, d))
        norm = np.sqrt((g * g).sum(axis=1))
        norm[norm == 0] = 1.0
        rad = rng.random(k) ** (1.0 / d)
        return g / norm[:, None] * rad[:, None]

    if kernel is None or kernel.kind == "spherical":
        return uniform(m)
    out = []
    have = 0
    while have < m:
        k = max(2 * (m - have), 64)
        v = uniform(k)
        u = rng.random(k)
        keep = u <= kernel(np.minimum(np.sqrt((v * v).sum(axis=1)), 1.0))
        v = v[keep]
        out.append(v)
        have += len(v)
    return np.concatenate(out)[:m] if out else np.zeros((0, d))


def sample_from_kde(est: DensityEstimate, m: int, seed: int, stream=()) -> PointSet:
    """``m`` i.i.d. draws ``X_I + h V`` from the fitted density."""
    if m < 0:
        raise InvalidArgument("m must be nonnegative")
    if m == 0:
        return PointSet(np.zeros((0, est.d)))
    rng = make_rng(seed, KDE_DRAW, *stream)
    idx = rng.integers(0, est.n, size=m)
    v = unit_ball_draws(rng, m, est.d, est.kernel)
    return PointSet(est.data.points[idx] + est.h * v)
