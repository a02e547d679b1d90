"""Risk estimates against a known synthetic law.

Everything here needs the true distribution, so it only applies to
:class:`~levelclust.synthetic.SyntheticSpec` data.  Monte-Carlo draws come
from a seed derived from the caller's seed, never from the data stream.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree
from sklearn.metrics import adjusted_rand_score

from ._rng import NOISE, RISK, make_rng
from .dataset import PointSet
from .errors import InvalidArgument
from .excess_mass import estimate_volume
from .kde import DensityEstimate, level_set_mask
from .synthetic import SyntheticSpec, generate, geometric_density, level_set_measure, level_set_member


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    M: int
    seed: int


def _mc_draws(spec: SyntheticSpec, M: int, seed: int, stream: int) -> np.ndarray:
    if M < 1:
        raise InvalidArgument("M must be >= 1")
    sub = int(make_rng(seed, stream).integers(0, 2 ** 63 - 1))
    return generate(spec, M, sub).points.points


def _bernoulli(mask, M, seed) -> MCEstimate:
    p = float(np.mean(mask))
    return MCEstimate(p, math.sqrt(p * (1 - p) / M), int(M), int(seed))


def level_set_risk(spec: SyntheticSpec, est: DensityEstimate, lam: float,
                   M: int = 100_000, seed: int = 0) -> MCEstimate:
    """P-mass of the symmetric difference between estimated and true level sets."""
    w = _mc_draws(spec, M, seed, RISK)
    truth = level_set_member(spec, lam, w)
    guess = level_set_mask(est.evaluate_batch(w), lam)
    return _bernoulli(truth != guess, M, seed)


def excess_mass_of(spec: SyntheticSpec, lam: float, M: int = 100_000, seed: int = 0,
                   est: DensityEstimate | None = None) -> MCEstimate:
    """``E(A) = P(A) - lam * mu(A)`` for the true level set, or for the
    estimated one when ``est`` is given.

    ``P`` is always estimated from draws of ``spec``.  The true set's
    measure is analytic; the estimate's comes from importance sampling with
    the estimate itself as proposal.
    """
    w = _mc_draws(spec, M, seed, RISK)
    if est is None:
        inside = level_set_member(spec, lam, w)
        vol, vol_se = level_set_measure(spec, lam), 0.0
    else:
        inside = level_set_mask(est.evaluate_batch(w), lam)
        if not inside.any() and not level_set_mask(est.at_data(), lam).any():
            return MCEstimate(0.0, 0.0, int(M), int(seed))
        v = estimate_volume(est, lam, est, M, seed)
        vol, vol_se = v.value, v.std_error
    p = _bernoulli(inside, M, seed)
    se = math.hypot(p.std_error, lam * vol_se)
    return MCEstimate(p.value - lam * vol, se, int(M), int(seed))


def misassignment_fraction(spec: SyntheticSpec, est: DensityEstimate, lam: float, sample) -> float:
    """Fraction of sample points where ``p_hat - lam`` and ``p - lam`` differ in
    sign, with sign(0) = +1 (so the level itself counts as inside)."""
    pts = sample.points if isinstance(sample, PointSet) else np.asarray(sample, dtype=np.float64)
    if len(pts) == 0:
        raise InvalidArgument("sample is empty")
    true_in = geometric_density(spec, pts) >= lam
    est_in = est.evaluate_batch(pts) >= lam
    return float(np.mean(true_in != est_in))


@dataclass(frozen=True, eq=False)
class NoiseCurve:
    epsilons: np.ndarray
    probs: np.ndarray
    fitted_gamma: float
    lam: float
    M: int
    seed: int

    def rows(self):
        for e, p in zip(self.epsilons, self.probs):
            yield float(e), float(p)


def noise_exponent_curve(spec: SyntheticSpec, lam: float, eps_grid=None,
                         M: int = 1_000_000, seed: int = 0) -> NoiseCurve:
    """``P(|p(X) - lam| < eps)`` over an epsilon grid and its log-log slope.

    Draws on lower-dimensional support (``p = inf``) are never within any
    epsilon.  The slope is fitted by least squares over the grid cells with
    positive probability; ``inf`` is returned when every cell is empty and
    ``nan`` when only one is populated.
    """
    if lam <= 0:
        raise InvalidArgument("noise exponent needs a positive level")
    eps = lam * np.logspace(-3, -1, 12) if eps_grid is None else np.asarray(eps_grid, dtype=np.float64)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) <= 0):
        raise InvalidArgument("epsilon grid must be positive and strictly increasing")
    w = _mc_draws(spec, M, seed, NOISE)
    p = geometric_density(spec, w)
    gap = np.where(np.isfinite(p), np.abs(p - lam), np.inf)
    gap.sort()
    probs = np.searchsorted(gap, eps, side="left") / M
    pos = probs > 0
    if not pos.any():
        gamma = math.inf
    elif pos.sum() < 2:
        gamma = math.nan
    else:
        gamma = float(np.polyfit(np.log(eps[pos]), np.log(probs[pos]), 1)[0])
    return NoiseCurve(eps, probs, gamma, float(lam), int(M), int(seed))


def min_intercluster_distance(c, ps) -> float:
    """Smallest distance between points of different clusters (``nan`` if k < 2)."""
    if c.k_hat < 2:
        return math.nan
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, dtype=np.float64)
    best = math.inf
    for j in range(1, c.k_hat):
        # everything in earlier components against component j
        earlier = np.concatenate(c.components[:j])
        dist, _ = cKDTree(pts[earlier]).query(pts[c.components[j]])
        best = min(best, float(dist.min()))
    return best


def agreement(true_labels, labels) -> float:
    """Adjusted Rand index between two labelings."""
    return float(adjusted_rand_score(np.asarray(true_labels), np.asarray(labels)))


@dataclass(frozen=True)
class RiskReport:
    level_set_risk: float
    excess_mass_true: float
    excess_mass_est: float
    excess_mass_risk: float
    misassignment_fraction: float
    mc_draws: int
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def risk_report(spec: SyntheticSpec, est: DensityEstimate, lam: float, sample,
                M: int = 100_000, seed: int = 0) -> RiskReport:
    risk = level_set_risk(spec, est, lam, M, seed).value
    e_true = excess_mass_of(spec, lam, M, seed).value
    e_est = excess_mass_of(spec, lam, M, seed, est).value
    return RiskReport(risk, e_true, e_est, e_true - e_est,
                      misassignment_fraction(spec, est, lam, sample), int(M), int(seed))
