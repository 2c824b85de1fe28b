"""Entropy estimators: Bowen spanning/separated, weak spanning, section counts.

Counts are greedy over a sample lattice scanned in a fixed order: separated
counts keep each point not yet close to a kept one (a maximal separated set,
so a lower bound for the largest), spanning counts open a new centre at each
point not yet covered (an upper bound for the smallest cover).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .sections import (
    SectionFamilyPair,
    ShadowPreconditionError,
    first_return,
    shadow_sequence,
)
from .spaces import ParameterError, SymbolWord, TorusPoint, torus_metric, word_distance
from .witness import (  # noqa: F401  growth control and witness trees
    Calibration,
    SplitResult,
    UnstableContinuum,
    WitnessTree,
    build_witness_tree,
    calibrate_delta0,
    find_unstable_continuum,
    growth_split,
    verify_separated,
)
from .systems import (
    FlowHandle,
    SuspensionPoint,
    UnsupportedSystemError,
    map_coords,
    suspension_distance_torus,
)

METHODS = ("bowen-span", "bowen-sep", "weak-span", "section-span", "section-sep")


# ------------------------------------------------------------------ lattices


@dataclass(frozen=True)
class SampleLattice:
    """Finite sample set F on the height-0 slice, in scan order.

    kind "torus": `points` (n, 2), a uniform side x side lattice of cell
    centres. kind "shift": `words` (n, 2w+1) symbol windows, column w is
    coordinate 0.
    """

    kind: str
    points: np.ndarray | None = None
    side: int = 0
    words: np.ndarray | None = None
    radius: int = 0
    description: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points) if self.kind == "torus" else len(self.words)

    def point(self, i: int):
        if self.kind == "torus":
            return SuspensionPoint(TorusPoint(*self.points[i]), 0.0)
        return SuspensionPoint(SymbolWord(tuple(self.words[i])), 0.0)


def torus_lattice(side: int, description: dict | None = None) -> SampleLattice:
    if side < 1:
        raise ParameterError("lattice side must be positive")
    i = (np.arange(side) + 0.5) / side
    pts = np.stack(np.meshgrid(i, i, indexing="ij"), axis=-1).reshape(-1, 2)
    desc = {"kind": "torus", "side": side, "points": side * side}
    desc.update(description or {})
    return SampleLattice("torus", pts, side, description=desc)


def section_lattice(pair: SectionFamilyPair, grid: int) -> SampleLattice:
    """grid x grid cell-centred samples in every T patch (torus) or cylinder
    representatives (shift, `grid` free coordinates)."""
    if pair.geometry == "shift-cylinder":
        return shift_lattice(grid)
    return torus_lattice(grid * pair.g, {"per_patch": f"{grid}x{grid}", "patches": pair.count})


def shift_lattice(bits: int = 9, first: int = 3, radius: int | None = None) -> SampleLattice:
    """One representative per cylinder on coordinates first..first+bits-1,
    with zeros elsewhere, in binary counting order."""
    if bits < 1:
        raise ParameterError("bits must be positive")
    last = first + bits - 1
    w = radius if radius is not None else last + 24
    words = np.zeros((2 ** bits, 2 * w + 1), dtype=np.int8)
    codes = np.arange(2 ** bits)
    for j in range(bits):
        words[:, w + first + j] = (codes >> (bits - 1 - j)) & 1
    desc = {"kind": "shift", "cylinders": 2 ** bits, "free_coordinates": [first, last], "radius": w}
    return SampleLattice("shift", words=words, radius=w, description=desc)


# ------------------------------------------------------------------- relations


def _window_radius(gamma: float, strict: bool) -> int:
    """Largest m with 2^-m >= gamma (strict) / > gamma; words closer than gamma
    agree on coordinates -m..m."""
    m = 0
    while (2.0 ** -(m + 1) >= gamma) if strict else (2.0 ** -(m + 1) > gamma):
        m += 1
    return m


def _shift_classes(F: SampleLattice, steps: int, gamma: float, strict: bool) -> int:
    """Greedy count for the shift: closeness over steps 0..steps means agreement
    on coordinates -m..steps+m, an equivalence relation."""
    m = _window_radius(gamma, strict)
    w = F.radius
    if steps + m > w:
        raise ParameterError("lattice words are too short for this many steps")
    block = F.words[:, w - m: w + steps + m + 1]
    seen = set()
    for row in block:
        seen.add(row.tobytes())
    return len(seen)


def _affine(flow: FlowHandle) -> bool:
    return flow.kind == "suspension" and flow.base.is_affine


def _count_offsets(flow: FlowHandle, F: SampleLattice, steps: int, gamma: float, strict: bool) -> int:
    offs = kernels.bowen_offsets(flow.base.matrix, F.side, steps, gamma, strict)
    # translation parts cancel in differences, so only M matters
    return len(kernels.greedy_offsets(F.side, offs))


def _orbit_close_matrix(flow: FlowHandle, pts: np.ndarray, steps: int, gamma: float, strict: bool) -> np.ndarray:
    close = np.ones((len(pts), len(pts)), dtype=bool)
    cur = pts % 1.0
    for k in range(steps + 1):
        d = torus_metric(cur[:, None, :], cur[None, :, :])
        close &= (d < gamma) if strict else (d <= gamma)
        cur = map_coords(flow.base, cur, 1)
    return close


def _check_counting(F: SampleLattice, t, gamma):
    if len(F) == 0:
        raise ParameterError("empty sample set")
    if not gamma > 0 or t < 0:
        raise ParameterError("need gamma > 0 and t >= 0")


# ------------------------------------------------------------ Bowen counting


def bowen_count(flow: FlowHandle, F: SampleLattice, t: float, gamma: float, mode: str,
                route: str = "auto", time_step: float = 0.125) -> int:
    """Greedy (t, gamma) spanning or separated count for the flow on F.

    span: e covers x when d(X^s e, X^s x) <= gamma for all s in [0, t].
    sep: x, y are separated when d(X^s x, X^s y) >= gamma for some s.
    Route "lattice" (integer t, level-0 lattices): on the height-0 slice the
    chain distance equals the base distance and between integer times it is
    bounded by the endpoint values, so only integer times matter. Route
    "sampled" evaluates the chain metric at times on a `time_step` grid.
    """
    _check_counting(F, t, gamma)
    if mode not in ("span", "sep"):
        raise ParameterError("mode must be span or sep")
    if flow.kind != "suspension":
        raise UnsupportedSystemError("entropy estimators need a suspension flow")
    strict = mode == "sep"
    integer_t = abs(t - round(t)) < 1e-12
    if route == "auto":
        route = "lattice" if integer_t and (F.kind == "shift" or _affine(flow)) else "sampled"
    if route == "lattice":
        if not integer_t:
            raise ParameterError("the lattice route needs an integer time")
        if F.kind == "shift":
            return _shift_classes(F, int(round(t)), gamma, strict)
        return _count_offsets(flow, F, int(round(t)), gamma, strict)
    if F.kind != "torus":
        raise UnsupportedSystemError("sampled Bowen counting is implemented for torus bases")
    times = np.unique(np.append(np.arange(0.0, t, time_step), t))
    close = np.ones((len(F), len(F)), dtype=bool)
    n = len(F)
    iu, ju = np.triu_indices(n, 1)
    for s in times:
        k = math.floor(s + 1e-12)
        h = max(s - k, 0.0)
        base = map_coords(flow.base, F.points, k) if k else F.points % 1.0
        d = suspension_distance_torus(flow.base, base[iu], h, base[ju], h, flow.chain_levels)
        ok = (d < gamma) if strict else (d <= gamma)
        close[iu, ju] &= ok
        close[ju, iu] &= ok
    return len(kernels.greedy_matrix(close))


# ------------------------------------------------------------- weak spanning


def weak_span_count(flow: FlowHandle, F: SampleLattice, t: float, gamma: float,
                    warp: str = "slopes", dt: float | None = None) -> int:
    """Greedy (t, gamma)-weakly spanning count.

    e covers x when some alignment h from the warp family keeps
    d(X^{h(s)} x, X^s e) <= gamma at every grid time s in [0, t]. The family
    is piecewise linear on a dt grid with slopes {1/2, 1, 2} ("slopes") or the
    identity alone ("identity"). The default dt is the largest unit fraction
    at most min(1/4, gamma/2), so a single warp step stays below gamma and
    dt divides every integer time. Any Bowen spanning set also weakly spans,
    so the reported count is the smaller of the weak greedy cover and the
    Bowen greedy cover.
    """
    if dt is None:
        dt = 1.0 / math.ceil(1.0 / min(0.25, gamma / 2.0))
    _check_counting(F, t, gamma)
    if not (_affine(flow) and F.kind == "torus"):
        raise UnsupportedSystemError("weak spanning is implemented for affine torus suspensions")
    if abs(t - round(t)) > 1e-12:
        raise ParameterError("weak spanning uses integer times")
    steps = int(round(t))
    J = int(round(t / dt))
    if abs(J * dt - t) > 1e-9:
        raise ParameterError("t must be a multiple of dt")
    M = flow.base.matrix.astype(float)
    Minv = flow.base.inverse_matrix().astype(float)
    b = flow.base.offset.astype(float)
    ball = kernels.bowen_offsets(flow.base.matrix, F.side, 0, gamma, strict=False)
    bowen = kernels.bowen_offsets(flow.base.matrix, F.side, steps, gamma, strict=False)
    weak = kernels.greedy_weak(F.side, F.points, ball, bowen, J, dt, gamma, M, Minv, b,
                               flow.chain_levels, warp == "slopes")
    strong = len(kernels.greedy_offsets(F.side, bowen))
    return int(min(weak, strong))


# ------------------------------------------------------------ section counts


def section_count(pair: SectionFamilyPair, flow: FlowHandle, n: int, gamma: float, mode: str,
                  F: SampleLattice, route: str = "auto") -> int:
    """Greedy r'(n, gamma) (span) or s'(n, gamma) (sep) over F ⊂ ∪T_i.

    x, y are separated when y^x_i is undefined or d(φ^i x, y^x_i) >= gamma
    for some i in 0..n; e covers x when every e^x_i is defined and
    d(φ^i x, e^x_i) < gamma. Since gamma < eps0 both relations are the
    complement of the same closeness relation, so the greedy scans coincide.
    Route "shadow" builds every shadow sequence explicitly; route "lattice"
    uses that on the unit-roof slice φ = f and the shadow of y is f^i(y) for
    as long as it stays eps0-close.
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if mode not in ("span", "sep"):
        raise ParameterError("mode must be span or sep")
    if not gamma < pair.eps0:
        raise ParameterError(f"gamma={gamma} must be below eps0={pair.eps0}")
    _check_counting(F, n, gamma)
    if route == "auto":
        route = "lattice" if (F.kind == "shift" or _affine(flow)) else "shadow"
    if route == "lattice":
        if F.kind == "shift":
            return _shift_classes(F, n, gamma, strict=True)
        return _count_offsets(flow, F, n, gamma, strict=True)
    close = section_close_matrix(pair, flow, F, n, gamma)
    return len(kernels.greedy_matrix(close))


def section_close_matrix(pair: SectionFamilyPair, flow: FlowHandle, F: SampleLattice,
                         n: int, gamma: float) -> np.ndarray:
    """Pairwise "not separated" relation built from explicit shadow sequences."""
    size = len(F)
    close = np.eye(size, dtype=bool)
    pts = [F.point(i) for i in range(size)]
    # pairs already gamma-apart at step 0 are separated, so only the others
    # need a shadow sequence
    for i, j in _step0_candidates(F, gamma):
        ok = not section_separated(pair, flow, pts[i], pts[j], n, gamma)[0]
        close[i, j] = close[j, i] = ok
    return close


def _step0_candidates(F: SampleLattice, gamma: float):
    for i in range(len(F)):
        if F.kind == "shift":
            d = np.array([word_distance(F.point(i).base, F.point(j).base) for j in range(i + 1, len(F))])
        else:
            d = torus_metric(F.points[i] % 1.0, F.points[i + 1:] % 1.0)
        for j in np.nonzero(d < gamma)[0]:
            yield i, i + 1 + int(j)


def section_separated(pair: SectionFamilyPair, flow: FlowHandle, x: SuspensionPoint,
                      y: SuspensionPoint, n: int, gamma: float) -> tuple[bool, int | None]:
    """(separated, first step) for the pair-separation criterion over 0..n."""
    try:
        orbit = shadow_sequence(pair, flow, x, y, n)
    except ShadowPreconditionError:
        return True, 0
    xi = x
    for i, yi, _ in orbit.entries:
        if i > 0:
            xi = first_return(pair, flow, xi)[0]
        if _slice_distance(xi.base, yi.base) >= gamma:
            return True, i
    if orbit.status == "diverged":
        return True, orbit.diverged_at
    return False, None


def _slice_distance(a, b) -> float:
    if isinstance(a, SymbolWord):
        return word_distance(a, b)
    return float(torus_metric(np.array([a.x, a.y]), np.array([b.x, b.y])))


# ------------------------------------------------------------------ fitting


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    endpoint_rate: float
    stable: bool


@dataclass(frozen=True)
class CountCurve:
    method: str
    gamma: float
    entries: tuple
    fit: GrowthFit | None = None
    resolution: dict = field(default_factory=dict)

    @property
    def fit_window(self) -> tuple:
        return (self.entries[0][0], self.entries[-1][0])

    @property
    def slope(self) -> float:
        return self.fit.slope


def fit_growth(entries, tolerance: float = 0.2) -> GrowthFit:
    """Least-squares slope of log(count) against n plus the endpoint rate
    log(c_max / c_min) / (n_max - n_min); unstable when they disagree by more
    than `tolerance` (relative)."""
    if isinstance(entries, CountCurve):
        entries = entries.entries
    entries = list(entries)
    if len(entries) < 3:
        raise ParameterError("need at least 3 entries to fit a growth rate")
    n = np.array([e[0] for e in entries], dtype=float)
    c = np.array([e[1] for e in entries], dtype=float)
    if np.any(c < 1):
        raise ParameterError("counts must be >= 1")
    y = np.log(c)
    slope = float(np.polyfit(n, y, 1)[0])
    endpoint = float((y[-1] - y[0]) / (n[-1] - n[0]))
    scale = max(abs(slope), abs(endpoint))
    stable = scale < 1e-3 or abs(slope - endpoint) <= tolerance * scale
    return GrowthFit(slope, endpoint, bool(stable))


def count_curve(method: str, flow: FlowHandle, F: SampleLattice, gamma: float, ns,
                pair: SectionFamilyPair | None = None, dt: float | None = None) -> CountCurve:
    """Counts for n (or integer t) in `ns` with the requested estimator, plus the fit."""
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}")
    entries = []
    for n in ns:
        if method == "bowen-span":
            c = bowen_count(flow, F, n, gamma, "span")
        elif method == "bowen-sep":
            c = bowen_count(flow, F, n, gamma, "sep")
        elif method == "weak-span":
            c = weak_span_count(flow, F, n, gamma, dt=dt)
        else:
            if pair is None:
                raise ParameterError("section methods need a section pair")
            c = section_count(pair, flow, n, gamma, method.split("-")[1], F)
        entries.append((int(n), int(c)))
    fit = fit_growth(entries) if len(entries) >= 3 else None
    return CountCurve(method, gamma, tuple(entries), fit, dict(F.description))


def exhaustive_max_separated(close: np.ndarray) -> int:
    """Exact largest separated set when closeness is an equivalence relation.

    Verifies transitivity, then returns the number of classes (one point per
    class is the unique maximal shape of an independent set in a disjoint
    union of cliques).
    """
    c = close.astype(np.int64)
    if not np.array_equal((c @ c > 0), close):
        raise ValueError("closeness is not transitive; exhaustive maximum not available")
    _, labels = np.unique(close, axis=0, return_inverse=True)
    return int(labels.max() + 1)
