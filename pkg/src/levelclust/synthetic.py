"""Synthetic mixtures with exact geometric densities.

A :class:`SyntheticSpec` is a weighted list of shapes living in R^dim.  Each
shape has a native dimension (the coordinates it uses, zero-padded up to
``dim``) and an intrinsic dimension.  Shapes whose intrinsic dimension is
below ``dim`` have infinite geometric density on their support, so they
belong to every level set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._rng import GENERATE, MOLLIFY, make_rng
from .dataset import PointSet
from .errors import InvalidArgument
from .kernels import as_kernel, unit_ball_volume
from .spatial import build_index

# tolerance for "on a curve" tests, relative to the shape's scale
_ON_TOL = 1e-9


def _pad(native, dim):
    native = np.asarray(native, dtype=np.float64)
    if native.shape[1] == dim:
        return native
    out = np.zeros((native.shape[0], dim))
    out[:, :native.shape[1]] = native
    return out


def _split_native(x, k):
    """Native coordinates and whether the padded tail is exactly zero."""
    return x[:, :k], np.all(x[:, k:] == 0.0, axis=1)


def _norm(v):
    return np.sqrt((v * v).sum(axis=-1))


@dataclass(frozen=True)
class UniformBox:
    low: tuple
    high: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.low, float), np.asarray(self.high, float)
        if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi < lo):
            raise InvalidArgument("box needs matching low <= high vectors")

    @property
    def native_dim(self):
        return len(self.low)

    @property
    def intrinsic_dim(self):
        return int(np.count_nonzero(np.asarray(self.high) > np.asarray(self.low)))

    @property
    def measure(self):
        return float(np.prod(np.asarray(self.high, float) - np.asarray(self.low, float)))

    def sample(self, rng, m):
        lo, hi = np.asarray(self.low, float), np.asarray(self.high, float)
        return lo + (hi - lo) * rng.random((m, len(lo)))

    def contains(self, x):
        lo, hi = np.asarray(self.low, float), np.asarray(self.high, float)
        return np.all((x >= lo) & (x <= hi), axis=1)

    def density(self, x):
        return np.where(self.contains(x), 1.0 / self.measure, 0.0)


@dataclass(frozen=True)
class PointMass:
    location: tuple

    @property
    def native_dim(self):
        return len(self.location)

    intrinsic_dim = 0
    measure = 0.0

    def sample(self, rng, m):
        return np.tile(np.asarray(self.location, float), (m, 1))

    def contains(self, x):
        return np.all(x == np.asarray(self.location, float), axis=1)


@dataclass(frozen=True)
class Gaussian:
    mean: tuple
    std: tuple

    def __post_init__(self):
        if len(self.mean) != len(self.std) or min(self.std) <= 0:
            raise InvalidArgument("gaussian needs positive std per coordinate")

    @property
    def native_dim(self):
        return len(self.mean)

    @property
    def intrinsic_dim(self):
        return len(self.mean)

    measure = math.inf

    def sample(self, rng, m):
        return np.asarray(self.mean, float) + np.asarray(self.std, float) * rng.standard_normal((m, len(self.mean)))

    def contains(self, x):
        return np.ones(len(x), dtype=bool)

    def density(self, x):
        mu, sd = np.asarray(self.mean, float), np.asarray(self.std, float)
        z = (x - mu) / sd
        norm = (2 * math.pi) ** (len(mu) / 2) * float(np.prod(sd))
        return np.exp(-0.5 * (z * z).sum(axis=1)) / norm

    def level_measure(self, c):
        """Lebesgue measure of ``{density >= c}``."""
        mu, sd = np.asarray(self.mean, float), np.asarray(self.std, float)
        k = len(mu)
        peak = 1.0 / ((2 * math.pi) ** (k / 2) * float(np.prod(sd)))
        if c <= 0:
            return math.inf
        if c > peak:
            return 0.0
        radius = math.sqrt(2 * math.log(peak / c))
        return unit_ball_volume(k) * radius ** k * float(np.prod(sd))


@dataclass(frozen=True)
class Segment:
    """Segment from ``start`` to ``end``; with ``thickness > 0`` the uniform
    law on the tube of that width (a thin rectangle in the plane)."""

    start: tuple
    end: tuple
    thickness: float = 0.0

    def __post_init__(self):
        a, b = np.asarray(self.start, float), np.asarray(self.end, float)
        if a.shape != b.shape or np.all(a == b) or self.thickness < 0:
            raise InvalidArgument("segment needs distinct endpoints and thickness >= 0")

    @property
    def native_dim(self):
        return len(self.start)

    @property
    def intrinsic_dim(self):
        return self.native_dim if self.thickness > 0 else 1

    def _frame(self):
        a, b = np.asarray(self.start, float), np.asarray(self.end, float)
        axis = b - a
        length = float(_norm(axis))
        u = axis / length
        # orthonormal complement of u
        q, _ = np.linalg.qr(np.column_stack([u, np.eye(len(u))]))
        return a, u, length, q[:, 1:len(u)]

    @property
    def measure(self):
        length = self._frame()[2]
        if self.native_dim == 1:
            return length
        if self.thickness == 0:
            return 0.0
        return length * self.thickness ** (self.native_dim - 1)

    def sample(self, rng, m):
        a, u, length, perp = self._frame()
        t = rng.random(m) * length
        pts = a + t[:, None] * u
        if self.thickness > 0 and perp.shape[1]:
            off = (rng.random((m, perp.shape[1])) - 0.5) * self.thickness
            pts = pts + off @ perp.T
        return pts

    def contains(self, x):
        a, u, length, perp = self._frame()
        rel = x - a
        t = rel @ u
        tol = _ON_TOL * max(1.0, length)
        along = (t >= -tol) & (t <= length + tol)
        across = rel @ perp if perp.shape[1] else np.zeros((len(x), 0))
        half = self.thickness / 2 + tol
        return along & np.all(np.abs(across) <= half, axis=1)

    def density(self, x):
        return np.where(self.contains(x), 1.0 / self.measure, 0.0)


@dataclass(frozen=True)
class Spiral:
    """Archimedean arc ``r = r0 + growth * phi``, ``phi in [0, 2 pi turns]``,
    sampled uniformly by arc length."""

    center: tuple = (0.0, 0.0)
    r0: float = 0.5
    growth: float = 0.3
    turns: float = 1.5

    native_dim = 2
    intrinsic_dim = 1
    measure = 0.0

    @property
    def phi_max(self):
        return 2 * math.pi * self.turns

    def _arc_table(self):
        phi = np.linspace(0.0, self.phi_max, 20001)
        speed = np.sqrt((self.r0 + self.growth * phi) ** 2 + self.growth ** 2)
        s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(phi))])
        return phi, s

    def sample(self, rng, m):
        phi_tab, s_tab = self._arc_table()
        phi = np.interp(rng.random(m) * s_tab[-1], s_tab, phi_tab)
        r = self.r0 + self.growth * phi
        return np.asarray(self.center, float) + np.column_stack([r * np.cos(phi), r * np.sin(phi)])

    def contains(self, x):
        rel = x - np.asarray(self.center, float)
        rad = _norm(rel)
        theta = np.arctan2(rel[:, 1], rel[:, 0])
        tol = _ON_TOL * max(1.0, self.r0 + self.growth * self.phi_max)
        hit = np.zeros(len(x), dtype=bool)
        for k in range(-1, int(math.ceil(self.turns)) + 2):
            phi = theta + 2 * math.pi * k
            ok = (phi >= -tol) & (phi <= self.phi_max + tol)
            hit |= ok & (np.abs(rad - (self.r0 + self.growth * phi)) <= tol)
        return hit


@dataclass(frozen=True)
class Arc:
    """Circular arc (angles in radians, ``theta0 < theta1``); with
    ``thickness > 0`` the uniform law on the annular sector."""

    center: tuple
    radius: float
    theta0: float
    theta1: float
    thickness: float = 0.0

    native_dim = 2

    @property
    def intrinsic_dim(self):
        return 2 if self.thickness > 0 else 1

    @property
    def measure(self):
        if self.thickness == 0:
            return 0.0
        return (self.theta1 - self.theta0) * self.radius * self.thickness

    def sample(self, rng, m):
        theta = self.theta0 + (self.theta1 - self.theta0) * rng.random(m)
        if self.thickness > 0:
            lo = (self.radius - self.thickness / 2) ** 2
            hi = (self.radius + self.thickness / 2) ** 2
            r = np.sqrt(lo + (hi - lo) * rng.random(m))
        else:
            r = np.full(m, float(self.radius))
        return np.asarray(self.center, float) + np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def contains(self, x):
        rel = x - np.asarray(self.center, float)
        rad = _norm(rel)
        tol = _ON_TOL * max(1.0, self.radius)
        theta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - self.theta0, 2 * math.pi)
        span = self.theta1 - self.theta0
        in_angle = (theta <= span + tol) | (theta >= 2 * math.pi - tol)
        return in_angle & (np.abs(rad - self.radius) <= self.thickness / 2 + tol)

    def density(self, x):
        return np.where(self.contains(x), 1.0 / self.measure, 0.0)


SHAPES = {"uniform_box": UniformBox, "point_mass": PointMass, "gaussian": Gaussian,
          "segment": Segment, "spiral": Spiral, "arc": Arc}


@dataclass(frozen=True)
class SyntheticSpec:
    components: tuple  # of (weight, shape)
    dim: int = 0
    name: str = ""

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        if not comps:
            raise InvalidArgument("spec needs at least one component")
        weights = np.array([w for w, _ in comps])
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidArgument(f"weights must be positive and sum to 1, got {weights.sum()!r}")
        native = max(s.native_dim for _, s in comps)
        dim = self.dim or native
        if dim < native:
            raise InvalidArgument(f"dim {dim} smaller than a shape's native dimension {native}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "dim", int(dim))

    @property
    def weights(self):
        return np.array([w for w, _ in self.components])

    def full_dimensional(self, shape):
        return shape.intrinsic_dim == self.dim

    def to_json(self):
        comps = []
        for w, s in self.components:
            entry = {"weight": w, "shape": next(k for k, v in SHAPES.items() if isinstance(s, v))}
            for key, val in s.__dict__.items():
                entry[key] = list(val) if isinstance(val, tuple) else val
            comps.append(entry)
        return {"name": self.name, "dim": self.dim, "components": comps}

    @classmethod
    def from_json(cls, obj):
        try:
            comps = []
            for entry in obj["components"]:
                entry = dict(entry)
                weight = entry.pop("weight")
                shape_cls = SHAPES[entry.pop("shape")]
                kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in entry.items()}
                comps.append((weight, shape_cls(**kwargs)))
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"bad spec description: {exc}") from None
        return cls(tuple(comps), int(obj.get("dim", 0)), obj.get("name", ""))


@dataclass(frozen=True, eq=False)
class LabeledSample:
    points: PointSet
    labels: np.ndarray = field(default=None)


def generate(spec: SyntheticSpec, n: int, seed: int) -> LabeledSample:
    """``n`` i.i.d. draws; labels are 1-based component indices."""
    if n < 0:
        raise InvalidArgument("n must be nonnegative")
    if n == 0:
        return LabeledSample(PointSet(np.zeros((0, spec.dim)), np.zeros(0, np.int64)),
                             np.zeros(0, np.int64))
    rng = make_rng(seed, GENERATE)
    comp = rng.choice(len(spec.components), size=n, p=spec.weights)
    pts = np.zeros((n, spec.dim))
    for k, (_, shape) in enumerate(spec.components):
        where = np.flatnonzero(comp == k)
        if where.size:
            pts[where] = _pad(shape.sample(make_rng(seed, GENERATE, k + 1), where.size), spec.dim)
    labels = comp.astype(np.int64) + 1
    return LabeledSample(PointSet(pts, labels), labels)


def _as_rows(spec, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or (x.ndim == 1 and spec.dim != 1 and x.size == spec.dim):
        x = x.reshape(1, -1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if spec.dim == 1 else x.reshape(1, -1)
    if x.shape[1] != spec.dim:
        raise InvalidArgument(f"points have dimension {x.shape[1]}, spec has {spec.dim}")
    return x


def geometric_density(spec: SyntheticSpec, x):
    """Geometric density at each row of ``x``; ``inf`` on lower-dimensional
    support.  Returns a float for a single point."""
    scalar = np.ndim(x) == 0 or (np.ndim(x) == 1 and np.size(x) == spec.dim)
    x = _as_rows(spec, x)
    out = np.zeros(len(x))
    for w, shape in spec.components:
        native, flat = _split_native(x, shape.native_dim)
        if spec.full_dimensional(shape):
            out += w * shape.density(x)
        else:
            on = flat & shape.contains(native)
            out[on] = np.inf
    return float(out[0]) if scalar else out


def support_member(spec: SyntheticSpec, x):
    x = _as_rows(spec, x)
    out = np.zeros(len(x), dtype=bool)
    for _, shape in spec.components:
        native, flat = _split_native(x, shape.native_dim)
        out |= flat & shape.contains(native)
    return out


def level_set_member(spec: SyntheticSpec, lam: float, x):
    """Analytic membership in the true lambda-level set (closed)."""
    if lam < 0:
        raise InvalidArgument("level must be nonnegative")
    scalar = np.ndim(x) == 0 or (np.ndim(x) == 1 and np.size(x) == spec.dim)
    if lam == 0:
        res = support_member(spec, x)
    else:
        res = geometric_density(spec, _as_rows(spec, x)) >= lam
    return bool(res[0]) if scalar else res


def level_set_measure(spec: SyntheticSpec, lam: float) -> float:
    """Lebesgue measure of the true level set, assuming disjoint supports."""
    total = 0.0
    gaussians = [s for _, s in spec.components if isinstance(s, Gaussian)]
    if gaussians and len(spec.components) > 1:
        raise InvalidArgument("analytic level-set measure needs disjoint components")
    for w, shape in spec.components:
        if not spec.full_dimensional(shape):
            continue
        if isinstance(shape, Gaussian):
            total += shape.level_measure(lam / w)
        elif lam == 0 or w / shape.measure >= lam:
            total += shape.measure
    return total


def mollified_density(spec: SyntheticSpec, kernel, h: float, x, M: int, seed: int):
    """Monte-Carlo estimate of ``p_h(x) = E K_h(x - Y)``, ``Y ~ spec``.

    Each non-atomic component gets ``M`` draws (stratified by component);
    point masses are convolved exactly.  Returns ``(values, std_errors)``.
    """
    if M < 1:
        raise InvalidArgument("M must be >= 1")
    x = _as_rows(spec, x)
    kernel = as_kernel(kernel, spec.dim)
    scale = 1.0 / (kernel.c_d * h ** spec.dim)
    value = np.zeros(len(x))
    var = np.zeros(len(x))
    for k, (w, shape) in enumerate(spec.components):
        if isinstance(shape, PointMass):
            loc = _pad(np.asarray(shape.location, float).reshape(1, -1), spec.dim)
            r = _norm(x - loc) / h
            value += w * scale * np.where(r <= 1, kernel(np.minimum(r, 1.0)), 0.0)
            continue
        draws = _pad(shape.sample(make_rng(seed, MOLLIFY, k + 1), M), spec.dim)
        index = build_index(draws, h)
        qi, _, dist = index.pairs_within(x, h)
        kv = kernel(np.minimum(dist / h, 1.0)) * scale
        s1 = np.bincount(qi, weights=kv, minlength=len(x))
        s2 = np.bincount(qi, weights=kv * kv, minlength=len(x))
        mean = s1 / M
        value += w * mean
        if M > 1:
            var += w * w * np.maximum(s2 / M - mean * mean, 0.0) / (M - 1)
    return value, np.sqrt(var)


def min_component_distance(spec: SyntheticSpec, m: int = 10_000, seed: int = 0) -> float:
    """Smallest distance between draws from different components."""
    samples = [
        _pad(shape.sample(make_rng(seed, GENERATE, 1000 + k), m), spec.dim)
        for k, (_, shape) in enumerate(spec.components)
    ]
    best = math.inf
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            dist, _ = cKDTree(samples[j]).query(samples[i])
            best = min(best, float(dist.min()))
    return best


# --- named laws used in the experiments -------------------------------------

def sharp_clusters():
    """(1/3) U(-5.5,-4.5) + (1/3) U(4.5,5.5) + (1/3) point mass at 0."""
    third = 1.0 / 3.0
    return SyntheticSpec((
        (third, UniformBox((-5.5,), (-4.5,))),
        (third, UniformBox((4.5,), (5.5,))),
        (1.0 - 2 * third, PointMass((0.0,))),
    ), 1, "sharp-fig1")


def two_uniform():
    """Uniform on [0, 1] union [5, 6]."""
    return SyntheticSpec((
        (0.5, UniformBox((0.0,), (1.0,))),
        (0.5, UniformBox((5.0,), (6.0,))),
    ), 1, "two-uniform")


def gaussian(d: int = 1, sigma: float = 1.0):
    return SyntheticSpec(((1.0, Gaussian((0.0,) * d, (sigma,) * d)),), d, "gaussian")


def stick_spiral(spiral_offset: float = 5.0):
    """Fuzzy vertical stick (width 0.2) plus a noiseless spiral to its right."""
    return SyntheticSpec((
        (0.5, Segment((0.0, -1.0), (0.0, 1.0), 0.2)),
        (0.5, Spiral((spiral_offset, 0.0), 0.5, 0.3, 1.5)),
    ), 2, "stick-spiral")


def two_moons(dim: int = 20, gap: float = 0.3, thickness: float = 0.0):
    """Interleaved unit half circles whose closest approach is ``gap``."""
    return SyntheticSpec((
        (0.5, Arc((0.0, 0.0), 1.0, 0.0, math.pi, thickness)),
        (0.5, Arc((1.0, 1.0 - gap), 1.0, math.pi, 2 * math.pi, thickness)),
    ), dim, "two-moons")


NAMED_SPECS = {
    "sharp-fig1": sharp_clusters,
    "two-uniform": two_uniform,
    "gaussian": gaussian,
    "stick-spiral": stick_spiral,
    "two-moons": two_moons,
}


def named_spec(name: str) -> SyntheticSpec:
    try:
        return NAMED_SPECS[name]()
    except KeyError:
        raise InvalidArgument(f"unknown spec {name!r}; choose from {sorted(NAMED_SPECS)}") from None
