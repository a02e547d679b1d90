"""Bandwidth selection by level-set stability.

The sample is split in three.  Two density estimates are fitted at the same
bandwidth on the first two parts, and the instability ``Xi(h)`` is the
fraction of the third part on which their level sets disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import PointSet, split
from .errors import InvalidArgument, SelectionError
from .excess_mass import _check_grid
from .kde import DensityEstimate, fit, level_set_mask

RULES = ("original", "modified")


@dataclass(frozen=True, eq=False)
class InstabilityCurve:
    grid: np.ndarray
    xi: np.ndarray
    lam: float
    seed: int
    alpha: float | None = None
    rule: str | None = None
    h0: float | None = None
    selected: float | None = None

    def rows(self):
        for h, v in zip(self.grid, self.xi):
            yield float(h), float(v)

    def summary(self) -> dict:
        return {"rule": self.rule, "alpha": self.alpha, "h0": self.h0,
                "selected_h": self.selected, "seed": self.seed, "lambda": self.lam}


def instability_at(estX: DensityEstimate, estY: DensityEstimate, z, lam: float) -> float:
    """Fraction of ``z`` where exactly one of the two level sets contains the point."""
    pts = z.points if isinstance(z, PointSet) else np.asarray(z, dtype=np.float64)
    if len(pts) == 0:
        raise InvalidArgument("instability needs a nonempty evaluation sample")
    if estX.h != estY.h or estX.kernel != estY.kernel:
        raise InvalidArgument("both estimates must share kernel and bandwidth")
    a = level_set_mask(estX.evaluate_batch(pts), lam)
    b = level_set_mask(estY.evaluate_batch(pts), lam)
    return float(np.mean(a != b))


def default_grid(ps: PointSet, num: int = 40) -> np.ndarray:
    """``num`` log-spaced bandwidths from ``0.01 * sigma`` to ``2 * diameter``.

    ``sigma`` is the root mean per-coordinate variance and the diameter is
    the largest pairwise distance (exact in low dimension, bounded by the
    bounding-box diagonal otherwise).  Degenerate samples fall back to a
    unit scale.
    """
    pts = ps.points
    if ps.n == 0:
        raise InvalidArgument("empty sample")
    sigma = float(np.sqrt(np.mean(pts.var(axis=0))))
    diam = data_diameter(pts)
    if not diam > 0:
        sigma, diam = 1.0, 1.0
    if not sigma > 0:
        sigma = diam
    return np.geomspace(0.01 * sigma, 2.0 * diam, num)


def data_diameter(points) -> float:
    """Largest pairwise distance (exact via the convex hull when cheap)."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        return 0.0
    if points.shape[1] == 1:
        return float(np.ptp(points))
    if len(points) <= 2000:
        from scipy.spatial.distance import pdist
        return float(pdist(points).max())
    return float(np.linalg.norm(np.ptp(points, axis=0)))


def instability_curve(ps: PointSet, grid, lam: float, seed: int = 0,
                      kernel="spherical") -> InstabilityCurve:
    """``Xi(h)`` for every grid bandwidth from a seeded three-way split."""
    grid = _check_grid(grid)
    if ps.n < 3:
        raise InvalidArgument("need at least three points for a three-way split")
    if lam < 0:
        raise InvalidArgument("level must be nonnegative")
    plan = split(ps, 3, seed)
    X, Y, Z = (ps.subset(ix) for ix in plan.part_indices)
    xi = np.array([instability_at(fit(X, kernel, h), fit(Y, kernel, h), Z, lam) for h in grid])
    return InstabilityCurve(grid, xi, float(lam), int(seed))


def select_bandwidth_stability(curve: InstabilityCurve, alpha: float = 0.05,
                               rule: str = "modified") -> InstabilityCurve:
    """Apply a selection rule to an evaluated curve.

    original: the smallest grid ``h`` such that ``Xi(t) <= alpha`` for every
    grid ``t >= h``.
    modified: ``h0`` is the argmax of ``Xi`` (first one on ties); the choice
    is the first grid ``h >= h0`` with ``Xi(h) <= alpha``.
    """
    if not 0 < alpha < 1:
        raise InvalidArgument("alpha must lie in (0, 1)")
    if rule not in RULES:
        raise InvalidArgument(f"unknown rule {rule!r}; expected one of {RULES}")
    xi, grid = curve.xi, curve.grid
    ok = xi <= alpha
    h0 = float(grid[int(np.argmax(xi))])
    if rule == "original":
        # suffix_ok[j]: every entry from j on is <= alpha
        suffix_ok = np.logical_and.accumulate(ok[::-1])[::-1]
        hits = np.flatnonzero(suffix_ok)
    else:
        hits = np.flatnonzero(ok & (grid >= h0))
    chosen = float(grid[hits[0]]) if hits.size else None
    out = replace(curve, alpha=float(alpha), rule=rule,
                  h0=h0 if rule == "modified" else None, selected=chosen)
    if chosen is None:
        raise SelectionError(f"no grid bandwidth satisfies the {rule} rule at alpha={alpha}", out)
    return out
