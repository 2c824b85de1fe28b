"""Points, metrics and sampled continua (arcs)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class KindMismatchError(TypeError):
    """Raised when two points of different kinds are compared."""


class ParameterError(ValueError):
    """Raised for out-of-domain numeric parameters."""


class PrecisionError(ValueError):
    """Raised when an operation would read beyond a word's reliable radius."""


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % 1.0)
        object.__setattr__(self, "y", float(self.y) % 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class IntervalPoint:
    x: float

    def __post_init__(self):
        x = float(self.x)
        if not 0.0 <= x <= 1.0:
            raise ParameterError(f"interval point must lie in [0, 1], got {x}")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class SymbolWord:
    """Window of a bi-infinite sequence over {0..k-1}, indexed -w..w."""

    window: tuple
    k: int = 2

    def __post_init__(self):
        window = tuple(int(s) for s in self.window)
        if len(window) % 2 != 1:
            raise ParameterError("window length must be odd (indices -w..w)")
        if any(s < 0 or s >= self.k for s in window):
            raise ParameterError(f"symbols must lie in 0..{self.k - 1}")
        object.__setattr__(self, "window", window)

    @property
    def w(self) -> int:
        return (len(self.window) - 1) // 2

    def symbol(self, i: int) -> int:
        if abs(i) > self.w:
            raise PrecisionError(f"index {i} beyond reliable radius {self.w}")
        return self.window[i + self.w]


def torus_delta(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Componentwise wrap-around displacement |a - b| reduced into [0, 1/2]."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


def torus_metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean quotient metric on R^2/Z^2, vectorized over leading axes."""
    d = torus_delta(a, b)
    return np.hypot(d[..., 0], d[..., 1])


def word_distance(p: SymbolWord, q: SymbolWord) -> float:
    if p.k != q.k:
        raise KindMismatchError("words over different alphabets")
    w = min(p.w, q.w)
    a = np.array(p.window[p.w - w: p.w + w + 1])
    b = np.array(q.window[q.w - w: q.w + w + 1])
    diff = np.nonzero(a != b)[0]
    if diff.size == 0:
        return 0.0
    return 2.0 ** (-int(np.min(np.abs(diff - w))))


def distance(p, q) -> float:
    """Metric between two points of the same kind."""
    if type(p) is not type(q):
        raise KindMismatchError(f"cannot compare {type(p).__name__} with {type(q).__name__}")
    if isinstance(p, TorusPoint):
        return float(torus_metric(p.as_array(), q.as_array()))
    if isinstance(p, IntervalPoint):
        return abs(p.x - q.x)
    if isinstance(p, SymbolWord):
        return word_distance(p, q)
    raise KindMismatchError(f"no metric registered for {type(p).__name__}")


# Arc chart metrics: coordinates are stored unwrapped in a chart, the metric
# is evaluated on the underlying space.
_CHART_DIM = {"torus": 2, "interval": 1}


def chart_metric(kind: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kind == "torus":
        return torus_metric(a, b)
    if kind == "interval":
        return np.abs(a[..., 0] - b[..., 0])
    raise KindMismatchError(f"unknown arc kind {kind!r}")


@dataclass(frozen=True)
class Arc:
    """Sampled continuum: an ordered polyline in a coordinate chart.

    `coords` has shape (n, dim). Torus coordinates are kept unwrapped so
    consecutive samples are chart-adjacent; the metric still wraps.
    """

    kind: str
    coords: np.ndarray
    arclen_params: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind not in _CHART_DIM:
            raise KindMismatchError(f"unknown arc kind {self.kind!r}")
        c = np.array(self.coords, dtype=float, copy=True).reshape(-1, _CHART_DIM[self.kind])
        if c.shape[0] < 1:
            raise ParameterError("an arc needs at least one sample")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        params = self.arclen_params
        if params is None:
            params = _arclength_params(c)
        params = np.array(params, dtype=float, copy=True)
        params.setflags(write=False)
        object.__setattr__(self, "arclen_params", params)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def samples(self) -> list:
        if self.kind == "torus":
            return [TorusPoint(x, y) for x, y in self.coords]
        return [IntervalPoint(min(max(x, 0.0), 1.0)) for (x,) in self.coords]

    @property
    def mesh(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.max(chart_metric(self.kind, self.coords[1:], self.coords[:-1])))


def _arclength_params(coords: np.ndarray) -> np.ndarray:
    if coords.shape[0] == 1:
        return np.zeros(1)
    seg = np.linalg.norm(np.diff(coords, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] == 0.0:
        return np.linspace(0.0, 1.0, coords.shape[0])
    return cum / cum[-1]


def segment_arc(start, end, n_samples: int = 2, kind: str = "torus") -> Arc:
    """Straight chart segment from `start` to `end` with uniform samples."""
    start = np.atleast_1d(np.asarray(start, dtype=float))
    end = np.atleast_1d(np.asarray(end, dtype=float))
    s = np.linspace(0.0, 1.0, n_samples)[:, None]
    return Arc(kind, start + s * (end - start))


def singleton_arc(point, kind: str = "torus") -> Arc:
    return Arc(kind, np.atleast_2d(np.asarray(point, dtype=float)))


def pairwise_max(kind: str, coords: np.ndarray, block: int = 2048) -> float:
    """Maximum pairwise metric distance among rows of `coords`."""
    n = coords.shape[0]
    best = 0.0
    for i in range(0, n, block):
        d = chart_metric(kind, coords[i:i + block, None, :], coords[None, :, :])
        best = max(best, float(d.max()))
    return best


def arc_diameter(A: Arc, metric=None) -> float:
    """Max pairwise distance over samples; `metric(a, b)` overrides the kind metric."""
    if len(A) == 1:
        return 0.0
    if metric is None:
        return pairwise_max(A.kind, A.coords)
    c = A.coords
    return float(np.max(metric(c[:, None, :], c[None, :, :])))


def refine_arc(A: Arc, target_mesh: float) -> Arc:
    """Insert linearly interpolated chart samples until the mesh is <= target."""
    if not target_mesh > 0:
        raise ParameterError("target_mesh must be positive")
    if len(A) == 1:
        return A
    c = A.coords
    seg = np.linalg.norm(np.diff(c, axis=0), axis=1)
    # chart length bounds the metric length, so this many pieces is enough
    pieces = np.maximum(1, np.ceil(seg / target_mesh).astype(int))
    if np.all(pieces == 1):
        return A
    out = [c[:1]]
    for i, k in enumerate(pieces):
        s = (np.arange(1, k + 1) / k)[:, None]
        out.append(c[i] + s * (c[i + 1] - c[i]))
    return Arc(A.kind, np.concatenate(out))


def interpolate_at(A: Arc, params) -> np.ndarray:
    """Chart coordinates of the polyline at arclength fractions `params`."""
    params = np.atleast_1d(np.asarray(params, dtype=float))
    p = A.arclen_params
    if len(A) == 1:
        return np.repeat(A.coords, len(params), axis=0)
    return np.stack([np.interp(params, p, A.coords[:, d]) for d in range(A.coords.shape[1])], axis=1)


def sub_arc_bounds(A: Arc, r: float, anchor: int) -> tuple[float, float]:
    """Arclength-fraction interval [lo, hi] of length r around the anchor."""
    if not 0 <= anchor < len(A):
        raise IndexError(f"anchor {anchor} out of range for {len(A)} samples")
    if not 0.0 <= r <= 1.0:
        raise ParameterError("r must lie in [0, 1]")
    a = float(A.arclen_params[anchor])
    lo = min(max(a - r / 2.0, 0.0), 1.0 - r)
    hi = lo + r
    # keep the anchor inside despite rounding
    return min(lo, a), max(hi, a)


def sub_arc(A: Arc, r: float, anchor: int) -> Arc:
    """Sub-polyline around the anchor covering an arclength fraction r.

    r=0 gives the singleton at the anchor and r=1 gives A. Endpoints are
    interpolated at exact fractions so the result varies continuously in r.
    """
    lo, hi = sub_arc_bounds(A, r, anchor)
    p = A.arclen_params
    if r == 0.0:
        return singleton_arc(A.coords[anchor], A.kind)
    if lo <= 0.0 and hi >= 1.0:
        return A
    inner = np.nonzero((p > lo) & (p < hi))[0]
    coords = np.concatenate([interpolate_at(A, lo), A.coords[inner], interpolate_at(A, hi)])
    return Arc(A.kind, coords)


def locate_sample(A: Arc, point) -> int:
    """Index of the sample nearest to `point` (chart coordinates)."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    d = chart_metric(A.kind, A.coords, point[None, :])
    return int(np.argmin(d))
