"""Base maps, unit-roof suspension flows, the chain metric and the interval flow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.special import expit, logit

from .spaces import (
    IntervalPoint,
    KindMismatchError,
    ParameterError,
    PrecisionError,
    SymbolWord,
    TorusPoint,
    distance,
    torus_metric,
)

CAT_MATRIX = np.array([[2, 1], [1, 1]])
CAT_INVERSE = np.array([[1, -1], [-1, 2]])
CAT_LAMBDA = (3.0 + math.sqrt(5.0)) / 2.0
DEFAULT_ROTATION = (math.sqrt(2.0) - 1.0, (math.sqrt(5.0) - 1.0) / 2.0)


class UnsupportedSystemError(ValueError):
    """Raised when an operation does not apply to the given system."""


@dataclass(frozen=True)
class ChartChange:
    """Invertible torus chart change with Lipschitz bounds for both directions."""

    name: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    lipschitz: float | None = None
    inverse_lipschitz: float | None = None


def identity_chart() -> ChartChange:
    return ChartChange("identity", lambda c: np.asarray(c, float) % 1.0,
                       lambda c: np.asarray(c, float) % 1.0, 1.0, 1.0)


def shear_chart(a: float = 0.05) -> ChartChange:
    """(x, y) -> (x + a sin(2 pi y), y), a smooth torus diffeomorphism."""

    def fwd(c):
        c = np.array(c, dtype=float)
        c[..., 0] = c[..., 0] + a * np.sin(2 * np.pi * c[..., 1])
        return c % 1.0

    def inv(c):
        c = np.array(c, dtype=float)
        c[..., 0] = c[..., 0] - a * np.sin(2 * np.pi * c[..., 1])
        return c % 1.0

    lip = 1.0 + 2 * np.pi * abs(a)
    return ChartChange(f"shear({a})", fwd, inv, lip, lip)


@dataclass(frozen=True)
class BaseMap:
    """A base homeomorphism.

    Torus maps are affine x -> M x + b (mod 1) or conjugates of those;
    `full-shift` acts on SymbolWord windows.
    """

    kind: str
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    k: int = 2
    inner: "BaseMap | None" = None
    chart: ChartChange | None = None
    name: str = ""

    @property
    def is_torus(self) -> bool:
        return self.kind in ("cat", "inverse-cat", "rotation", "conjugated")

    @property
    def is_affine(self) -> bool:
        return self.kind in ("cat", "inverse-cat", "rotation")

    def inverse_matrix(self) -> np.ndarray:
        m = self.matrix
        det = round(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) * det


def cat_map() -> BaseMap:
    return BaseMap("cat", CAT_MATRIX, np.zeros(2), name="cat")


def inverse_cat_map() -> BaseMap:
    return BaseMap("inverse-cat", CAT_INVERSE, np.zeros(2), name="inverse-cat")


def rotation_map(angle=DEFAULT_ROTATION) -> BaseMap:
    return BaseMap("rotation", np.eye(2, dtype=int), np.asarray(angle, dtype=float),
                   name=f"rotation({angle[0]:.6g},{angle[1]:.6g})")


def full_shift(k: int = 2) -> BaseMap:
    return BaseMap("full-shift", k=k, name=f"full-shift({k})")


def conjugated(inner: BaseMap, chart: ChartChange) -> BaseMap:
    if not inner.is_torus:
        raise UnsupportedSystemError("only torus maps can be conjugated by a chart change")
    return BaseMap("conjugated", inner=inner, chart=chart, name=f"{chart.name}*{inner.name}")


def _affine_step(f: BaseMap, c: np.ndarray, sign: int) -> np.ndarray:
    if sign > 0:
        return c @ f.matrix.T + f.offset
    return (c - f.offset) @ f.inverse_matrix().T


def map_chart(f: BaseMap, coords: np.ndarray, power: int) -> np.ndarray:
    """Apply f^power to torus coordinates without reducing mod 1.

    For affine maps the result is the lift, so unwrapped polylines stay
    continuous. Conjugated maps are reduced and then re-unwrapped along the
    sample order.
    """
    c = np.array(coords, dtype=float)
    if f.is_affine:
        sign = 1 if power > 0 else -1
        for _ in range(abs(power)):
            c = _affine_step(f, c, sign)
        return c
    if f.kind == "conjugated":
        base = np.floor(c[..., :1, :]) if c.ndim == 2 else 0.0
        g = f.chart.inverse(c % 1.0)
        g = map_coords(f.inner, g, power)
        out = f.chart.forward(g)
        if out.ndim == 2 and out.shape[0] > 1:
            out = _unwrap(out)
        return out + base
    raise UnsupportedSystemError(f"{f.kind} does not act on torus coordinates")


def _unwrap(c: np.ndarray) -> np.ndarray:
    step = np.diff(c, axis=0)
    step -= np.round(step)
    return np.concatenate([c[:1], c[:1] + np.cumsum(step, axis=0)])


def map_coords(f: BaseMap, coords: np.ndarray, power: int) -> np.ndarray:
    """Apply f^power to torus coordinates, reducing mod 1 after every step."""
    c = np.array(coords, dtype=float) % 1.0
    if f.is_affine:
        sign = 1 if power > 0 else -1
        for _ in range(abs(power)):
            c = _affine_step(f, c, sign) % 1.0
        return c
    if f.kind == "conjugated":
        g = f.chart.inverse(c)
        g = map_coords(f.inner, g, power)
        return f.chart.forward(g) % 1.0
    raise UnsupportedSystemError(f"{f.kind} does not act on torus coordinates")


def shift_word(p: SymbolWord, power: int) -> SymbolWord:
    """(sigma^power x)_i = x_{i+power}; the reliable radius shrinks by |power|."""
    if abs(power) > p.w:
        raise PrecisionError(f"shift by {power} exceeds reliable radius {p.w}")
    w = p.w - abs(power)
    return SymbolWord(tuple(p.symbol(i + power) for i in range(-w, w + 1)), p.k)


def apply_map(f: BaseMap, p, power: int = 1):
    """f^power(p) for a single point."""
    if f.kind == "full-shift":
        if not isinstance(p, SymbolWord):
            raise KindMismatchError("the shift acts on SymbolWord points")
        return shift_word(p, power)
    if not isinstance(p, TorusPoint):
        raise KindMismatchError(f"{f.kind} acts on TorusPoint points")
    x, y = map_coords(f, p.as_array(), power)
    return TorusPoint(x, y)


# ---------------------------------------------------------------- suspension


@dataclass(frozen=True)
class SuspensionPoint:
    base: object
    height: float

    def __post_init__(self):
        h = float(self.height)
        if not 0.0 <= h < 1.0:
            raise ParameterError(f"height must be reduced into [0, 1), got {h}")
        object.__setattr__(self, "height", h)


def suspend(f: BaseMap, base, height: float) -> SuspensionPoint:
    """Canonical form of (base, height): (y, 1) is identified with (f(y), 0)."""
    k = math.floor(height)
    h = height - k
    if h >= 1.0:  # rounding guard
        h, k = 0.0, k + 1
    if k != 0:
        base = apply_map(f, base, k)
    return SuspensionPoint(base, h)


def suspension_flow(f: BaseMap, p: SuspensionPoint, t: float) -> SuspensionPoint:
    return suspend(f, p.base, p.height + t)


def chain_levels(G: int = 32) -> np.ndarray:
    return np.arange(G) / G


_WRAPS = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1))


def suspension_distance(f: BaseMap, p: SuspensionPoint, q: SuspensionPoint, G: int = 32) -> float:
    """Shortest chain over the implemented chain family.

    Family: pure vertical chains; vertical-horizontal-vertical chains through
    a level on a G-grid plus {height(p), height(q), 0}; the same with one roof
    wrap at either end. A horizontal segment at level l between (y,l), (z,l)
    has length (1-l) d(y,z) + l d(f y, f z).
    """
    if type(p.base) is not type(q.base):
        raise KindMismatchError("suspension points over different base kinds")
    if p == q:
        return 0.0
    s, u = p.height, q.height
    levels = np.unique(np.concatenate([chain_levels(G), [s, u, 0.0]]))
    yb = {w: apply_map(f, p.base, w) if w else p.base for w in (-1, 0, 1, 2)}
    zb = {w: apply_map(f, q.base, w) if w else q.base for w in (-1, 0, 1, 2)}
    best = math.inf
    for k in (-1, 0, 1):
        if distance(yb[k], q.base) == 0.0:
            best = min(best, abs(k + u - s))
    for wp, wq in _WRAPS:
        d0 = distance(yb[wp], zb[wq])
        d1 = distance(yb[wp + 1], zb[wq + 1])
        cost = np.abs(wp + levels - s) + np.abs(wq + levels - u) + (1 - levels) * d0 + levels * d1
        best = min(best, float(cost.min()))
    return best


def suspension_distance_torus(f: BaseMap, y: np.ndarray, s: np.ndarray, z: np.ndarray,
                              u: np.ndarray, G: int = 32) -> np.ndarray:
    """Vectorized chain-family distance for torus bases.

    y, z have shape (n, 2); s, u shape (n,). Same family as
    `suspension_distance`.
    """
    y = np.atleast_2d(np.asarray(y, float)) % 1.0
    z = np.atleast_2d(np.asarray(z, float)) % 1.0
    s = np.broadcast_to(np.asarray(s, float), y.shape[:1])
    u = np.broadcast_to(np.asarray(u, float), z.shape[:1])
    yb = {w: map_coords(f, y, w) if w else y for w in (-1, 0, 1, 2)}
    zb = {w: map_coords(f, z, w) if w else z for w in (-1, 0, 1, 2)}
    levels = chain_levels(G)[None, :]
    best = np.full(y.shape[0], np.inf)
    for k in (-1, 0, 1):
        same = torus_metric(yb[k], z) < 1e-12
        best = np.where(same, np.minimum(best, np.abs(k + u - s)), best)
    for wp, wq in _WRAPS:
        d0 = torus_metric(yb[wp], zb[wq])[:, None]
        d1 = torus_metric(yb[wp + 1], zb[wq + 1])[:, None]
        for lv in (levels, s[:, None], u[:, None], np.zeros((1, 1))):
            cost = (np.abs(wp + lv - s[:, None]) + np.abs(wq + lv - u[:, None])
                    + (1 - lv) * d0 + lv * d1)
            best = np.minimum(best, cost.min(axis=1))
    return best


@numba.njit(cache=True)
def _wrap_d(ax, ay, bx, by):
    dx = abs(ax - bx) % 1.0
    dy = abs(ay - by) % 1.0
    dx = min(dx, 1.0 - dx)
    dy = min(dy, 1.0 - dy)
    return math.sqrt(dx * dx + dy * dy)


@numba.njit(cache=True)
def _affine_pow(M, Minv, b, x, y, w):
    for _ in range(abs(w)):
        if w > 0:
            x, y = M[0, 0] * x + M[0, 1] * y + b[0], M[1, 0] * x + M[1, 1] * y + b[1]
        else:
            x, y = x - b[0], y - b[1]
            x, y = Minv[0, 0] * x + Minv[0, 1] * y, Minv[1, 0] * x + Minv[1, 1] * y
        x %= 1.0
        y %= 1.0
    return x, y


@numba.njit(cache=True)
def chain_distance_affine(yx, yy, s, zx, zy, u, M, Minv, b, G):
    """Numba twin of `suspension_distance_torus` for affine base maps."""
    best = np.inf
    for k in (-1, 0, 1):
        ax, ay = _affine_pow(M, Minv, b, yx, yy, k)
        if _wrap_d(ax, ay, zx, zy) < 1e-12:
            best = min(best, abs(k + u - s))
    for wi in range(5):
        wp = (0, 1, -1, 0, 0)[wi]
        wq = (0, 0, 0, 1, -1)[wi]
        # vertical part alone is at least |(wp - wq) - (s - u)|
        if abs(wp - wq - s + u) >= best:
            continue
        ax, ay = _affine_pow(M, Minv, b, yx, yy, wp)
        bx, by = _affine_pow(M, Minv, b, zx, zy, wq)
        d0 = _wrap_d(ax, ay, bx, by)
        ax, ay = _affine_pow(M, Minv, b, ax, ay, 1)
        bx, by = _affine_pow(M, Minv, b, bx, by, 1)
        d1 = _wrap_d(ax, ay, bx, by)
        for j in range(G + 3):
            if j < G:
                lv = j / G
            elif j == G:
                lv = s
            elif j == G + 1:
                lv = u
            else:
                lv = 0.0
            c = abs(wp + lv - s) + abs(wq + lv - u) + (1 - lv) * d0 + lv * d1
            if c < best:
                best = c
    return best


# ------------------------------------------------------------ interval flow


def interval_flow(x: IntervalPoint | float, t: float):
    """x e^t / (1 + x (e^t - 1)), evaluated in logit form for stability."""
    point = isinstance(x, IntervalPoint)
    v = x.x if point else np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where((v <= 0.0) | (v >= 1.0), v, expit(logit(np.clip(v, 1e-300, 1 - 1e-16)) + t))
    if point:
        return IntervalPoint(float(out))
    return out if np.ndim(out) else float(out)


# ------------------------------------------------------------------- flows


@dataclass(frozen=True)
class FlowHandle:
    """A flow: a unit-roof suspension of a base map or the interval flow."""

    kind: str
    base: BaseMap | None = None
    tolerance: float = 1e-9
    roof: float = 1.0
    name: str = ""
    chain_levels: int = field(default=32)

    def __post_init__(self):
        if self.kind not in ("suspension", "interval-logistic"):
            raise UnsupportedSystemError(f"unknown flow kind {self.kind!r}")
        if self.roof != 1.0:
            raise UnsupportedSystemError("only the constant roof 1 is supported")
        if self.kind == "suspension" and self.base is None:
            raise ParameterError("a suspension needs a base map")

    @property
    def has_fixed_points(self) -> bool:
        return self.kind == "interval-logistic"

    def flow(self, p, t: float):
        if self.kind == "interval-logistic":
            return interval_flow(p, t)
        return suspension_flow(self.base, p, t)

    def distance(self, p, q) -> float:
        if self.kind == "interval-logistic":
            return distance(p, q)
        return suspension_distance(self.base, p, q, self.chain_levels)


SYSTEMS = ("cat-suspension", "shift2-suspension", "rotation-suspension", "interval-logistic")


def make_system(name: str) -> FlowHandle:
    """Flow for a CLI system descriptor."""
    if name == "cat-suspension":
        return FlowHandle("suspension", cat_map(), name=name)
    if name == "shift2-suspension":
        return FlowHandle("suspension", full_shift(2), name=name)
    if name == "rotation-suspension":
        return FlowHandle("suspension", rotation_map(), name=name)
    if name == "interval-logistic":
        return FlowHandle("interval-logistic", name=name)
    raise UnsupportedSystemError(f"unknown system {name!r}; expected one of {', '.join(SYSTEMS)}")
