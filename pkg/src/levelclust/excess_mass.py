"""Bandwidth selection by maximizing a held-out excess mass.

For a candidate bandwidth the level set ``L_h = {p_h >= lambda}`` is fitted
on one half of the data and scored on the other half by

    E(h) = (fraction of held-out points in L_h) - lambda * vol(L_h),

with ``vol(L_h)`` estimated by importance sampling from a wide pilot
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import VOLUME
from .dataset import PointSet, split
from .errors import InvalidArgument, NumericalSupportError, SelectionError
from .kde import DensityEstimate, fit, level_set_mask, sample_from_kde

# below this the pilot density is treated as zero
_TINY = 1e-300


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    M: int
    pilot_bandwidth: float
    std_error: float


class ImportanceSample:
    """Draws ``U_1..U_M`` from a pilot estimate together with ``1/g(U_i)``.

    One sample can score any number of level sets whose support the pilot
    dominates, which is how the selector reuses it across the grid.
    """

    def __init__(self, pilot: DensityEstimate, M: int, seed: int, stream=()):
        if M < 1:
            raise InvalidArgument("M must be >= 1")
        self.pilot = pilot
        self.M = int(M)
        self.draws = sample_from_kde(pilot, self.M, seed, (VOLUME, *stream)).points
        self.g = pilot.evaluate_batch(self.draws)

    def volume(self, est: DensityEstimate, lam: float) -> VolumeEstimate:
        if self.pilot.h < est.h:
            raise InvalidArgument(
                f"pilot bandwidth {self.pilot.h} is smaller than h={est.h}; "
                "the pilot must dominate the level set"
            )
        inside = level_set_mask(est.evaluate_batch(self.draws), lam)
        if np.any(inside & (self.g < _TINY)):
            raise NumericalSupportError(
                "level-set point drawn where the pilot density vanishes"
            )
        ratio = np.zeros(self.M)
        ratio[inside] = 1.0 / self.g[inside]
        value = float(ratio.mean())
        se = float(ratio.std(ddof=1) / math.sqrt(self.M)) if self.M > 1 else math.inf
        return VolumeEstimate(value, self.M, self.pilot.h, se)


def estimate_volume(est: DensityEstimate, lam: float, pilot: DensityEstimate,
                    M: int, seed: int) -> VolumeEstimate:
    """Importance-sampling estimate of the Lebesgue measure of ``{p_h >= lam}``.

    ``pilot`` is the proposal ``g``; it must have bandwidth ``>= est.h``.
    """
    if pilot.h < est.h:
        raise InvalidArgument(f"pilot bandwidth {pilot.h} < h={est.h}")
    return ImportanceSample(pilot, M, seed).volume(est, lam)


def empirical_excess_mass(est: DensityEstimate, lam: float, test, vol: VolumeEstimate | None) -> float:
    """Held-out excess mass: covered fraction of ``test`` minus ``lam * vol``."""
    pts = test.points if isinstance(test, PointSet) else np.asarray(test, dtype=np.float64)
    if len(pts) == 0:
        raise InvalidArgument("test sample is empty")
    covered = float(np.mean(level_set_mask(est.evaluate_batch(pts), lam)))
    if lam == 0:
        return covered
    if vol is None:
        raise InvalidArgument("a volume estimate is required when lambda > 0")
    return covered - lam * vol.value


@dataclass(frozen=True, eq=False)
class ExcessMassCurve:
    grid: np.ndarray
    values: np.ndarray
    defined: np.ndarray
    selected: float | None
    lam: float
    M: int
    seed: int
    pilot_bandwidth: float
    volumes: np.ndarray = field(default=None)

    def rows(self):
        for h, v, ok in zip(self.grid, self.values, self.defined):
            yield float(h), float(v), bool(ok)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise InvalidArgument("bandwidth grid is empty")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise InvalidArgument("bandwidth grid must be positive and strictly increasing")
    return grid


def default_M(n: int) -> int:
    return int(min(n * n, 1_000_000))


def select_bandwidth_excess_mass(ps: PointSet, grid, lam: float, M: int | None = None,
                                 seed: int = 0, kernel="spherical") -> ExcessMassCurve:
    """Pick the grid bandwidth maximizing the held-out excess mass.

    At ``lam == 0`` the criterion is just coverage of the held-out half and
    the smallest bandwidth reaching full coverage is chosen.  Level sets that
    are empty (``lam > 0``) score 0 and are skipped unless all are empty, in
    which case :class:`SelectionError` is raised with the curve attached.
    """
    grid = _check_grid(grid)
    if ps.n < 2:
        raise InvalidArgument("need at least two points to split")
    if lam < 0:
        raise InvalidArgument("level must be nonnegative")
    M = default_M(ps.n) if M is None else int(M)
    plan = split(ps, 2, seed)
    train, test = ps.subset(plan.part_indices[0]), ps.subset(plan.part_indices[1])
    H = float(grid[-1])
    sampler = None
    if lam > 0:
        sampler = ImportanceSample(fit(train, kernel, H), M, seed)

    values = np.zeros(grid.size)
    volumes = np.zeros(grid.size)
    defined = np.zeros(grid.size, dtype=bool)
    for j, h in enumerate(grid):
        est = fit(train, kernel, h)
        if 0 < lam and est.upper_bound < lam:
            continue  # level set provably empty
        covered = level_set_mask(est.evaluate_batch(test.points), lam)
        if lam == 0:
            values[j] = covered.mean()
            defined[j] = True
            continue
        vol = sampler.volume(est, lam)
        volumes[j] = vol.value
        nonempty = vol.value > 0 or covered.any() or level_set_mask(est.at_data(), lam).any()
        defined[j] = nonempty
        values[j] = covered.mean() - lam * vol.value if nonempty else 0.0

    selected = None
    if lam == 0:
        full = np.flatnonzero(values == 1.0)
        pick = full[0] if full.size else int(np.argmax(values))
        selected = float(grid[pick])
    elif defined.any():
        masked = np.where(defined, values, -np.inf)
        selected = float(grid[int(np.argmax(masked))])
    curve = ExcessMassCurve(grid, values, defined, selected, float(lam), M, int(seed), H, volumes)
    if selected is None:
        raise SelectionError("level too high: every candidate level set is empty", curve)
    return curve


# --- adaptive grid -----------------------------------------------------------

@dataclass(frozen=True)
class GridParams:
    n: int
    d: int
    a_n: float
    W_n: float
    A_n: dict
    delta_n: dict
    upsilon_n: dict
    N: dict
    gammas: dict


def adaptive_grid(n: int, d: int, max_size: int | None = None):
    """Bandwidth grid adapting over smoothness ``theta`` and noise exponent.

    With ``a = log(n)/n`` and for each ``theta`` in ``1..d``:

        A(theta)   = 2 |log a| a^(theta/(2 theta + d)) theta^2 / (2 theta + d)^2
        delta      = a^(theta/d) / (2 A)
        W          = log 2 / (log n - log log n)
        Upsilon    = 2 theta^2 / (d^2 W) - 2 theta / d - 1
        N          = floor(Upsilon / delta)  (at least 0)
        gamma_j    = (j - 1) delta,  j = 1..N
        h          = a^((gamma + 1) / (2 theta + d (gamma + 1)))

    Returns ``(params, bandwidths)`` with bandwidths sorted and deduplicated
    (relative tolerance 1e-12).  If more than ``max_size`` remain, the list
    is thinned to the entries nearest ``max_size`` log-spaced targets.
    """
    if n < 3:
        raise InvalidArgument("adaptive grid needs n >= 3")
    if d < 1:
        raise InvalidArgument("dimension must be >= 1")
    a = math.log(n) / n
    W = math.log(2) / (math.log(n) - math.log(math.log(n)))
    A, delta, ups, N, gammas = {}, {}, {}, {}, {}
    hs = []
    for theta in range(1, d + 1):
        A[theta] = 2 * abs(math.log(a)) * a ** (theta / (2 * theta + d)) * theta ** 2 / (2 * theta + d) ** 2
        delta[theta] = a ** (theta / d) / (2 * A[theta])
        ups[theta] = 2 * theta ** 2 / (d ** 2 * W) - 2 * theta / d - 1
        N[theta] = max(int(math.floor(ups[theta] / delta[theta])), 0)
        g = np.arange(N[theta]) * delta[theta]
        gammas[theta] = g
        hs.append(a ** ((g + 1) / (2 * theta + d * (g + 1))))
    params = GridParams(n, d, a, W, A, delta, ups, N, gammas)
    allh = np.sort(np.concatenate(hs)) if hs else np.zeros(0)
    if allh.size:
        keep = np.concatenate([[True], np.diff(allh) > 1e-12 * allh[1:]])
        allh = allh[keep]
    if max_size is not None and allh.size > max_size:
        targets = np.geomspace(allh[0], allh[-1], max_size)
        logs = np.log(allh)
        pos = np.searchsorted(logs, np.log(targets)).clip(1, allh.size - 1)
        left_closer = np.log(targets) - logs[pos - 1] <= logs[pos] - np.log(targets)
        allh = np.unique(allh[np.where(left_closer, pos - 1, pos)])
    return params, allh
