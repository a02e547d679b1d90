"""Bootstrap cluster counting.

Draw a large sample from the fitted density restricted to its level set and
run the neighborhood-graph clustering on all of it.  Since every draw
already satisfies the level condition, no density filter is applied to the
graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import BOOTSTRAP
from .cluster_graph import Clustering, cluster_points
from .dataset import PointSet
from .errors import InfeasibleLevelError, InvalidArgument
from .kde import DensityEstimate, level_set_mask, sample_from_kde

_MIN_BATCH = 256
_MAX_BATCH = 1 << 20


@dataclass(frozen=True)
class BootstrapRequest:
    N: int
    lam: float
    rho: float
    edge_factor: float = 2.0
    seed: int = 0
    max_rejections: int = 10_000

    def __post_init__(self):
        if self.N < 1:
            raise InvalidArgument("N must be >= 1")
        if self.max_rejections < 1:
            raise InvalidArgument("max_rejections must be >= 1")
        if self.lam < 0:
            raise InvalidArgument("level must be nonnegative")
        if not self.rho > 0 or not self.edge_factor > 0:
            raise InvalidArgument("rho and edge_factor must be positive")


@dataclass(frozen=True, eq=False)
class BootstrapClustering(Clustering):
    """Clustering of the bootstrap sample; ``points`` holds that sample."""

    points: PointSet = None


def sample_conditional(est: DensityEstimate, lam: float, m: int, seed: int,
                       max_rejections: int = 10_000) -> PointSet:
    """Exactly ``m`` draws from ``p_h`` conditioned on ``{p_h >= lam}``.

    Proposals come from :func:`sample_from_kde` in batches, batch ``b``
    using its own seeded stream, and the accepted draws are kept in batch
    order.  The batch size depends only on how many draws are still needed
    and the acceptance seen so far, so the output is a function of the seed.

    Raises :class:`InfeasibleLevelError` if no sample point reaches the
    level, or once rejections exceed ``max_rejections`` per requested draw.
    """
    if m < 0:
        raise InvalidArgument("m must be nonnegative")
    if max_rejections < 1:
        raise InvalidArgument("max_rejections must be >= 1")
    if m == 0:
        return PointSet(np.zeros((0, est.d)))
    if lam > 0 and not level_set_mask(est.at_data(), lam).any():
        raise InfeasibleLevelError(f"no sample point has estimated density >= {lam}")
    parts, have, drawn, rejected = [], 0, 0, 0
    cap = max_rejections * m
    b = 0
    while have < m:
        rate = have / drawn if drawn else 1.0
        need = m - have
        if lam == 0:
            size = need  # nothing is ever rejected
        else:
            size = int(min(max(math.ceil(1.1 * need / max(rate, 1e-6)), _MIN_BATCH), _MAX_BATCH))
        prop = sample_from_kde(est, size, seed, (BOOTSTRAP, b)).points
        if lam > 0:
            prop = prop[level_set_mask(est.evaluate_batch(prop), lam)]
        parts.append(prop[:need])
        have += min(len(prop), need)
        drawn += size
        rejected += size - len(prop)
        if have < m and rejected > cap:
            raise InfeasibleLevelError(
                f"rejection cap exceeded at level {lam}: {rejected} rejections "
                f"for {have} of {m} accepted draws"
            )
        b += 1
    return PointSet(np.concatenate(parts))


def bootstrap_clusters(est: DensityEstimate, req: BootstrapRequest) -> BootstrapClustering:
    """Components of the radius graph over ``req.N`` conditional draws."""
    pts = sample_conditional(est, req.lam, req.N, req.seed, req.max_rejections)
    c = cluster_points(pts.points, req.edge_factor * req.rho)
    params = {"h": est.h, "lambda": float(req.lam), "rho": float(req.rho),
              "edge_factor": float(req.edge_factor), "kernel": est.kernel.kind,
              "N": int(req.N), "seed": int(req.seed)}
    return BootstrapClustering(c.components, c.labels, params, pts)
