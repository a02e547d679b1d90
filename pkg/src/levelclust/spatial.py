"""Fixed-radius neighbor search.

Both index types only generate *candidate* pairs; the final ``<= r`` test is
always done here with :func:`distances`, so every index (and a linear scan)
agrees bit-for-bit on which pairs are in range.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.spatial import cKDTree

# The grid cell is made slightly larger than the design radius so that a
# radius query at that radius only ever needs the 3^d surrounding cells.
_CELL_PAD = 1.0 + 1e-4
_MAX_CELLS = 2 ** 62
# beyond this many neighbor-cell offsets a tree is cheaper than the grid walk
_MAX_OFFSETS = 729


def distances(a, b):
    """Row-wise Euclidean distance between equal-shape arrays."""
    diff = a - b
    return np.sqrt((diff * diff).sum(axis=-1))


def linear_scan(points, x, r):
    """Indices of ``points`` within ``r`` of ``x`` by brute force."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    dist = distances(points, np.broadcast_to(x, points.shape))
    return np.flatnonzero(dist <= r)


class SpatialIndex:
    """Base class; subclasses implement :meth:`_candidates`."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=np.float64)

    @property
    def n(self):
        return self.points.shape[0]

    def _candidates(self, queries, r):
        raise NotImplementedError

    def pairs_within(self, queries, r):
        """All (query, point) pairs at distance <= r.

        Returns ``(qi, pi, dist)`` sorted by query index then point index.
        """
        queries = np.asarray(queries, dtype=np.float64)
        empty = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        if queries.shape[0] == 0 or self.n == 0:
            return empty
        qi, pi = self._candidates(queries, r)
        keep = distances(queries[qi], self.points[pi]) <= r
        key = qi[keep] * np.int64(self.n) + pi[keep]
        key.sort()
        qi = key // self.n
        pi = key - qi * self.n
        return qi, pi, distances(queries[qi], self.points[pi])

    def count_within(self, queries, r):
        """Number of points within ``r`` of each query row."""
        queries = np.asarray(queries, dtype=np.float64)
        if queries.shape[0] == 0 or self.n == 0:
            return np.zeros(queries.shape[0], np.int64)
        qi, pi = self._candidates(queries, r)
        keep = distances(queries[qi], self.points[pi]) <= r
        return np.bincount(qi[keep], minlength=queries.shape[0])

    def radius_query(self, x, r):
        """Sorted indices i with ``|x - X_i| <= r``."""
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        _, pi, _ = self.pairs_within(x, r)
        return pi


class GridIndex(SpatialIndex):
    """Uniform hash grid; cell side is ``radius`` (padded slightly)."""

    def __init__(self, points, radius):
        super().__init__(points)
        d = self.points.shape[1]
        self.cell = float(radius) * _CELL_PAD
        self.origin = self.points.min(axis=0) if self.n else np.zeros(d)
        coords = np.floor((self.points - self.origin) / self.cell).astype(np.int64)
        self.shape = tuple(int(s) for s in coords.max(axis=0) + 1) if self.n else (1,) * d
        keys = np.ravel_multi_index(coords.T, self.shape) if self.n else np.zeros(0, np.int64)
        self.order = np.argsort(keys, kind="stable")
        self.sorted_keys = keys[self.order]
        self._tree = None

    @staticmethod
    def fits(points, radius):
        """Whether a grid over ``points`` with this radius has a sane key space."""
        if radius <= 0 or not np.isfinite(radius):
            return False
        span = np.ptp(points, axis=0) if len(points) else np.zeros(1)
        cells = np.floor(span / (radius * _CELL_PAD)) + 1
        return float(np.prod(cells)) < _MAX_CELLS

    def _candidates(self, queries, r):
        d = self.points.shape[1]
        reach = int(np.floor(r / self.cell + 1e-6)) + 1
        if (2 * reach + 1) ** d > _MAX_OFFSETS:
            if self._tree is None:
                self._tree = TreeIndex(self.points)
            return self._tree._candidates(queries, r)
        shape = np.array(self.shape)
        rel = (queries - self.origin) / self.cell
        # clip before the int cast so far-away queries cannot overflow
        rel = np.clip(np.floor(rel), -reach - 1, shape + reach)
        qcell = rel.astype(np.int64)
        q_parts, p_parts = [], []
        for off in itertools.product(range(-reach, reach + 1), repeat=d):
            c = qcell + np.array(off, dtype=np.int64)
            ok = np.all((c >= 0) & (c < shape), axis=1)
            if not ok.any():
                continue
            qidx = np.flatnonzero(ok)
            keys = np.ravel_multi_index(c[ok].T, self.shape)
            lo = np.searchsorted(self.sorted_keys, keys, side="left")
            hi = np.searchsorted(self.sorted_keys, keys, side="right")
            counts = hi - lo
            has = counts > 0
            if not has.any():
                continue
            qidx, lo, counts = qidx[has], lo[has], counts[has]
            total = int(counts.sum())
            starts = np.repeat(lo - np.cumsum(counts) + counts, counts)
            pos = np.arange(total) + starts
            q_parts.append(np.repeat(qidx, counts))
            p_parts.append(self.order[pos])
        if not q_parts:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        return np.concatenate(q_parts), np.concatenate(p_parts)


class TreeIndex(SpatialIndex):
    """KD-tree backed index (scipy), used in higher dimensions."""

    def __init__(self, points):
        super().__init__(points)
        self.tree = cKDTree(self.points) if self.n else None

    def _candidates(self, queries, r):
        slack = r * (1 + 1e-9) + 1e-300
        qtree = cKDTree(queries)
        rec = qtree.sparse_distance_matrix(self.tree, slack, output_type="ndarray")
        return rec["i"].astype(np.int64), rec["j"].astype(np.int64)


def build_index(points, radius, kind="auto"):
    """Index tuned for queries at ``radius``.

    ``auto`` picks the grid for d <= 3 and the tree otherwise (or when the
    grid key space would overflow).
    """
    points = np.asarray(points, dtype=np.float64)
    d = points.shape[1] if points.ndim == 2 else 1
    if kind == "auto":
        kind = "grid" if d <= 3 and GridIndex.fits(points, radius) else "tree"
    if kind == "grid":
        return GridIndex(points, radius)
    if kind == "tree":
        return TreeIndex(points)
    raise ValueError(f"unknown index kind {kind!r}")
