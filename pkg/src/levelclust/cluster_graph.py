"""Level-set clustering through a rho-neighborhood graph.

Steps: keep the sample points whose estimated density reaches the level,
join any two kept points at distance ``<= edge_factor * rho``, and label the
connected components found by depth-first search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .kde import DensityEstimate, level_set_mask
from .spatial import build_index


@dataclass(frozen=True, eq=False)
class NeighborhoodGraph:
    """Undirected graph in CSR form over a subset of sample indices.

    ``indptr``/``indices`` address positions in ``node_ids`` (local ids);
    ``node_ids`` maps them back to sample indices.
    """

    node_ids: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    rho: float
    edge_factor: float

    @property
    def num_nodes(self):
        return len(self.node_ids)

    @property
    def num_edges(self):
        return len(self.indices) // 2

    def neighbors(self, local):
        return self.indices[self.indptr[local]:self.indptr[local + 1]]

    def adjacency(self):
        """Dense boolean adjacency matrix (local ids); for small graphs."""
        m = self.num_nodes
        adj = np.zeros((m, m), dtype=bool)
        rows = np.repeat(np.arange(m), np.diff(self.indptr))
        adj[rows, self.indices] = True
        return adj


@dataclass(frozen=True, eq=False)
class Clustering:
    """Components are arrays of sample indices; label 0 marks points below
    the level, labels 1..k_hat follow component order."""

    components: tuple
    labels: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def k_hat(self) -> int:
        return len(self.components)

    @property
    def node_ids(self):
        if not self.components:
            return np.zeros(0, np.int64)
        return np.sort(np.concatenate(self.components))


def neighborhood_graph(points, node_ids, radius) -> tuple:
    """CSR adjacency over ``points[node_ids]`` joining pairs within ``radius``."""
    node_ids = np.asarray(node_ids, dtype=np.int64)
    m = len(node_ids)
    if m == 0:
        return np.zeros(1, np.int64), np.zeros(0, np.int64)
    sub = np.asarray(points, dtype=np.float64)[node_ids]
    index = build_index(sub, radius)
    qi, pi, _ = index.pairs_within(sub, radius)
    keep = qi != pi
    qi, pi = qi[keep], pi[keep]
    indptr = np.zeros(m + 1, np.int64)
    np.cumsum(np.bincount(qi, minlength=m), out=indptr[1:])
    return indptr, pi


def build_graph(est: DensityEstimate, lam: float, rho: float, edge_factor: float = 2.0) -> NeighborhoodGraph:
    """Graph on ``{i : p_h(X_i) >= lam}`` with edges ``|X_i - X_j| <= edge_factor * rho``."""
    if not rho > 0:
        raise InvalidArgument(f"rho must be positive, got {rho}")
    if lam < 0:
        raise InvalidArgument("level must be nonnegative")
    if edge_factor <= 0:
        raise InvalidArgument("edge_factor must be positive")
    nodes = np.flatnonzero(level_set_mask(est.at_data(), lam))
    indptr, indices = neighborhood_graph(est.data.points, nodes, edge_factor * rho)
    return NeighborhoodGraph(nodes, indptr, indices, float(rho), float(edge_factor))


def connected_components(g: NeighborhoodGraph) -> list:
    """Components by iterative depth-first search.

    Returned in canonical form: each component is a sorted array of sample
    indices, components ordered by their smallest member.
    """
    m = g.num_nodes
    seen = np.zeros(m, dtype=bool)
    comps = []
    for root in range(m):
        if seen[root]:
            continue
        seen[root] = True
        stack = [root]
        members = []
        while stack:
            v = stack.pop()
            members.append(v)
            nb = g.indices[g.indptr[v]:g.indptr[v + 1]]
            fresh = nb[~seen[nb]]
            if fresh.size:
                seen[fresh] = True
                stack.extend(fresh.tolist())
        comps.append(np.sort(g.node_ids[np.array(members, dtype=np.int64)]))
    # node_ids ascending + roots visited ascending => already ordered by min member
    return comps


def _labels_from(components, n):
    labels = np.zeros(n, dtype=np.int64)
    for k, comp in enumerate(components, start=1):
        labels[comp] = k
    labels.setflags(write=False)
    return labels


def extract_clusters(est: DensityEstimate, lam: float, rho: float | None = None, edge_factor: float = 2.0) -> Clustering:
    """Cluster the sample at level ``lam``; ``rho`` defaults to the bandwidth."""
    rho = est.h if rho is None else rho
    g = build_graph(est, lam, rho, edge_factor)
    comps = connected_components(g)
    params = {"h": est.h, "lambda": float(lam), "rho": float(rho),
              "edge_factor": float(edge_factor), "kernel": est.kernel.kind}
    return Clustering(tuple(comps), _labels_from(comps, est.n), params)


def cluster_points(points, radius) -> Clustering:
    """Components of the radius graph over *all* rows of ``points``."""
    points = np.asarray(points, dtype=np.float64)
    nodes = np.arange(len(points))
    indptr, indices = neighborhood_graph(points, nodes, radius)
    g = NeighborhoodGraph(nodes, indptr, indices, float(radius), 1.0)
    comps = connected_components(g)
    return Clustering(tuple(comps), _labels_from(comps, len(points)), {"radius": float(radius)})


def assign_point(c: Clustering, est: DensityEstimate, x) -> int:
    """Label for a new point: its nearest clustered node within rho, or 0."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    value = est.evaluate(x)
    lam = c.params.get("lambda", 0.0)
    if not level_set_mask(value, lam):
        return 0
    rho = c.params.get("rho", est.h)
    cand = est.index.radius_query(x, rho)
    cand = cand[c.labels[cand] > 0]
    if cand.size == 0:
        return 0
    diff = est.data.points[cand] - x
    dist = np.sqrt((diff * diff).sum(axis=1))
    return int(c.labels[cand[np.argmin(dist)]])
