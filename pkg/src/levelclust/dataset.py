"""Point-cloud container, CSV ingestion and reproducible splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import SPLIT, make_rng
from .errors import InvalidArgument, ParseError


@dataclass(frozen=True, eq=False)
class PointSet:
    """n points in R^d with optional integer labels (0 = noise).

    An empty set has shape ``(0, 0)``; ``d == 0`` is the "unknown" sentinel.
    """

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 0)
        elif pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise InvalidArgument("points must be a 2-D array of rows")
        if pts.shape[0] > 0 and pts.shape[1] < 1:
            raise InvalidArgument("points need at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("points contain NaN or infinite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
            if lab.shape[0] != pts.shape[0]:
                raise InvalidArgument(
                    f"{lab.shape[0]} labels for {pts.shape[0]} points"
                )
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx) -> "PointSet":
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return PointSet(self.points[idx], labels)


@dataclass(frozen=True, eq=False)
class SplitPlan:
    part_indices: tuple = field(default_factory=tuple)
    seed: int = 0

    @property
    def parts(self) -> int:
        return len(self.part_indices)


def split(ps, parts: int, seed: int) -> SplitPlan:
    """Partition ``range(n)`` into ``parts`` near-equal random parts.

    ``ps`` may be a PointSet or a plain count.  The permutation is a seeded
    Fisher-Yates shuffle; remainders go to the earlier parts and each part is
    returned in ascending index order.
    """
    n = ps if isinstance(ps, (int, np.integer)) else ps.n
    if parts < 1:
        raise InvalidArgument("parts must be positive")
    if n < parts:
        raise InvalidArgument(f"cannot split {n} points into {parts} parts")
    perm = make_rng(seed, SPLIT, parts).permutation(n)
    base, extra = divmod(n, parts)
    out = []
    start = 0
    for i in range(parts):
        size = base + (1 if i < extra else 0)
        chunk = np.sort(perm[start:start + size])
        chunk.setflags(write=False)
        out.append(chunk)
        start += size
    return SplitPlan(tuple(out), int(seed))


def load_points(path, has_labels: bool = False, header: bool = False) -> PointSet:
    """Read a comma-separated point file, one point per line.

    Blank lines are skipped.  With ``has_labels`` the last column is an
    integer label.
    """
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                if has_labels and width < 2:
                    raise ParseError("need at least one coordinate plus a label", lineno)
            elif len(row) != width:
                raise ParseError(f"expected {width} columns, got {len(row)}", lineno)
            cells = row[:-1] if has_labels else row
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ParseError(f"non-numeric cell ({exc})", lineno) from None
            if has_labels:
                try:
                    labels.append(int(row[-1]))
                except ValueError:
                    raise ParseError(f"label {row[-1]!r} is not an integer", lineno) from None
    if not rows:
        return PointSet(np.zeros((0, 0)), np.zeros(0, np.int64) if has_labels else None)
    try:
        return PointSet(np.array(rows), labels if has_labels else None)
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from None


_OWN_LABELS = object()


def save_points(ps: PointSet, path, labels=_OWN_LABELS) -> None:
    """Write points (and labels, if any) so that :func:`load_points` reads
    back identical doubles.  By default the set's own labels are written;
    pass ``labels=None`` to drop them."""
    if labels is _OWN_LABELS:
        labels = ps.labels
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            for i in range(ps.n):
                cells = [format(float(v), ".17g") for v in ps.points[i]]
                if labels is not None:
                    cells.append(str(int(labels[i])))
                fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
