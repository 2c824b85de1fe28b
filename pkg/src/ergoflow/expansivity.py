"""Continuum-wise expansivity: reparametrized orbit diameters, searches for
violations, the fixed-point witness, discrete sequences of times, the
discrete check for base maps and transport through chart changes.

All "for every t" conditions are checked on a sampled window [-W, W].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .spaces import (
    Arc,
    IntervalPoint,
    ParameterError,
    PrecisionError,
    arc_diameter,
    chart_metric,
    refine_arc,
    segment_arc,
)
from .systems import (
    BaseMap,
    ChartChange,
    FlowHandle,
    UnsupportedSystemError,
    conjugated,
    interval_flow,
    map_chart,
    map_coords,
    suspension_distance_torus,
)


class StructureError(ValueError):
    """Raised when a time-change family does not match its arc."""


class NotApplicableError(RuntimeError):
    """Raised when a construction does not apply to the given flow."""


class RangeExhaustedError(RuntimeError):
    """Raised when no admissible next grid time exists."""


# ------------------------------------------------------------ time changes


@dataclass(frozen=True)
class ReparamFamily:
    """One increasing piecewise-linear time change per arc sample.

    All rows share `breakpoints` (increasing, containing 0); row i holds the
    values of the time change of sample i there. Beyond the outer
    breakpoints every time change continues with slope 1.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    guide_index: int

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).reshape(-1)
        vals = np.array(self.values, dtype=float).reshape(-1, bp.size)
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        problems = self.problems()
        if problems:
            raise StructureError("; ".join(problems))

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def identity(cls, n: int, guide_index: int = 0) -> "ReparamFamily":
        return cls(np.zeros(1), np.zeros((n, 1)), guide_index)

    def problems(self) -> list:
        bp, vals = self.breakpoints, self.values
        out = []
        if np.any(np.diff(bp) <= 0):
            out.append("breakpoints must be strictly increasing")
        zero = np.nonzero(bp == 0.0)[0]
        if zero.size != 1:
            out.append("breakpoints must contain 0")
        elif np.any(vals[:, zero[0]] != 0.0):
            out.append("every time change must fix 0")
        if vals.shape[1] > 1 and np.any(np.diff(vals, axis=1) <= 0):
            out.append("time changes must be strictly increasing")
        if not 0 <= self.guide_index < len(vals):
            out.append("guide index out of range")
        elif np.max(np.abs(vals[self.guide_index] - bp)) > 1e-12:
            out.append("the guide sample's time change must be the identity")
        return out

    def evaluate(self, t: float) -> np.ndarray:
        """alpha(x_i)(t) for every sample i."""
        bp, vals = self.breakpoints, self.values
        if t <= bp[0]:
            return vals[:, 0] + (t - bp[0])
        if t >= bp[-1]:
            return vals[:, -1] + (t - bp[-1])
        j = int(np.searchsorted(bp, t, side="right")) - 1
        w = (t - bp[j]) / (bp[j + 1] - bp[j])
        return (1.0 - w) * vals[:, j] + w * vals[:, j + 1]

    def continuity_constant(self, A: Arc) -> float:
        """max over adjacent samples of |difference of values| / d(samples)."""
        if len(A) != len(self):
            raise StructureError("sample count mismatch")
        if len(A) < 2:
            return 0.0
        dv = np.max(np.abs(np.diff(self.values, axis=0)), axis=1)
        dx = chart_metric(A.kind, A.coords[1:], A.coords[:-1])
        return float(np.max(dv / np.maximum(dx, 1e-300)))

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist(),
                "guide_index": self.guide_index}


def lemma_h(t: float) -> float:
    """t + 1 outside (-2, 1), 2t on [0, 1), t/2 on (-2, 0)."""
    if t <= -2.0 or t >= 1.0:
        return t + 1.0
    if t >= 0.0:
        return 2.0 * t
    return t / 2.0


def lemma_h_blend(u: float, t: float) -> float:
    """h_u(t) = (1 - u) t + u h(t)."""
    return (1.0 - u) * t + u * lemma_h(t)


# ------------------------------------------------------------- diameters


def _check_pair(flow: FlowHandle, A: Arc, alpha: ReparamFamily):
    if len(alpha) != len(A):
        raise StructureError(f"{len(alpha)} time changes for {len(A)} samples")
    want = "interval" if flow.kind == "interval-logistic" else "torus"
    if A.kind != want:
        raise StructureError(f"{flow.name or flow.kind} needs {want} arcs, got {A.kind}")
    if flow.kind == "suspension" and not flow.base.is_torus:
        raise UnsupportedSystemError("reparametrized diameters need a torus base")


def _affine_args(f: BaseMap):
    return (f.matrix.astype(float), f.inverse_matrix().astype(float), f.offset.astype(float))


def _suspension_images(f: BaseMap, base: np.ndarray, taus: np.ndarray):
    k = np.floor(taus + 1e-12).astype(int)
    h = np.maximum(taus - k, 0.0)
    pos = np.empty_like(base)
    for kk in np.unique(k):
        sel = k == kk
        pos[sel] = map_coords(f, base[sel], int(kk)) if kk else base[sel] % 1.0
    return pos, h


def _diameter_from_taus(flow: FlowHandle, A: Arc, taus: np.ndarray, stop: float = math.inf,
                        route: str = "auto") -> float:
    if len(A) == 1:
        return 0.0
    if flow.kind == "interval-logistic":
        img = interval_flow(A.coords[:, 0], taus)
        return float(np.max(img) - np.min(img))
    f = flow.base
    if route == "auto":
        route = "compiled" if f.is_affine else "vectorized"
    if route == "compiled":
        if not f.is_affine:
            raise UnsupportedSystemError("the compiled route needs an affine base")
        c = A.coords % 1.0
        return float(kernels.reparam_diameter_affine(c[:, 0].copy(), c[:, 1].copy(), taus,
                                                     *_affine_args(f), flow.chain_levels, stop))
    pos, h = _suspension_images(f, A.coords, taus)
    iu, ju = np.triu_indices(len(A), 1)
    d = suspension_distance_torus(f, pos[iu], h[iu], pos[ju], h[ju], flow.chain_levels)
    return float(d.max())


def reparam_orbit_diameter(flow: FlowHandle, A: Arc, alpha: ReparamFamily, t: float,
                           route: str = "auto") -> float:
    """diam {X^{alpha(x)(t)}(x) : x sample of A}.

    Torus arcs are read as points on the height-0 slice of the suspension.
    Route "compiled" (affine bases) and "vectorized" evaluate the same chain
    metric.
    """
    _check_pair(flow, A, alpha)
    return _diameter_from_taus(flow, A, alpha.evaluate(t), route=route)


def time_grid(window: float, t_step: float, alpha: ReparamFamily | None = None) -> np.ndarray:
    """Sampled times in [-W, W], ordered by |t| so violations show up early."""
    if not window > 0 or not t_step > 0:
        raise ParameterError("window and t_step must be positive")
    k = int(math.floor(window / t_step + 1e-9))
    ts = np.arange(-k, k + 1) * t_step
    if alpha is not None:
        bp = alpha.breakpoints
        ts = np.concatenate([ts, bp[np.abs(bp) <= window], [-window, window]])
    ts = np.unique(ts)
    return ts[np.argsort(np.abs(ts), kind="stable")]


def sup_diameter(flow: FlowHandle, A: Arc, alpha: ReparamFamily, window: float, t_step: float,
                 stop: float = math.inf) -> float:
    """Sup over the sampled window, stopping once `stop` is reached."""
    _check_pair(flow, A, alpha)
    best = 0.0
    for t in time_grid(window, t_step, alpha):
        best = max(best, _diameter_from_taus(flow, A, alpha.evaluate(t), stop))
        if best >= stop:
            break
    return best


def orbit_segment_distance(flow: FlowHandle, A: Arc, guide: int, eps: float,
                           samples: int = 401) -> float:
    """max over samples a of min over sampled s in (-eps, eps) of d(a, X^s(x_guide))."""
    s = -eps + (np.arange(samples) + 0.5) * (2.0 * eps / samples)
    if flow.kind == "interval-logistic":
        seg = interval_flow(np.full(samples, A.coords[guide, 0]), s)
        return float(np.max(np.min(np.abs(A.coords[:, :1] - seg[None, :]), axis=1)))
    f = flow.base
    g = np.repeat(A.coords[guide:guide + 1] % 1.0, samples, axis=0)
    pos, h = _suspension_images(f, g, s)
    worst = 0.0
    for a in A.coords % 1.0:
        d = suspension_distance_torus(f, np.repeat(a[None, :], samples, axis=0), np.zeros(samples),
                                      pos, h, flow.chain_levels)
        worst = max(worst, float(d.min()))
    return worst


# --------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class CwVerdict:
    """Outcome of a search. Counterexamples carry everything needed to replay."""

    outcome: str
    kind: str
    system: str
    eps: float
    delta: float
    window: float
    t_step: float
    budget: int
    consumed: int
    census: dict = field(default_factory=dict)
    arc: Arc | None = None
    alpha: ReparamFamily | None = None
    sup_diameter: float | None = None
    containment_distance: float | None = None
    n_max: int | None = None

    @property
    def is_counterexample(self) -> bool:
        return self.outcome == "counterexample"

    def to_dict(self) -> dict:
        out = {
            "outcome": self.outcome, "kind": self.kind, "system": self.system,
            "eps": self.eps, "delta": self.delta, "window": self.window, "t_step": self.t_step,
            "budget": self.budget, "consumed": self.consumed, "census": self.census,
        }
        if self.n_max is not None:
            out["n_max"] = self.n_max
        if self.is_counterexample:
            out["arc"] = {"kind": self.arc.kind, "coords": self.arc.coords.tolist()}
            out["alpha"] = self.alpha.to_dict() if self.alpha is not None else None
            out["sup_diameter"] = self.sup_diameter
            out["containment_distance"] = self.containment_distance
        return out


def verify_counterexample(flow: FlowHandle, verdict: CwVerdict) -> bool:
    """Re-check a flow counterexample from scratch: sampled sup diameter below
    delta on the window, and the arc not within the eps orbit segment of its
    guide point (tolerance = arc mesh)."""
    if not verdict.is_counterexample or verdict.kind != "flow":
        return False
    A, alpha = verdict.arc, verdict.alpha
    sup = sup_diameter(flow, A, alpha, verdict.window, verdict.t_step)
    away = orbit_segment_distance(flow, A, alpha.guide_index, verdict.eps)
    return bool(sup < verdict.delta and away > A.mesh)


# ------------------------------------------------------------------ seeds


def eigen_directions(f: BaseMap) -> list:
    """Unit real eigenvectors of an affine map's matrix (empty otherwise)."""
    if not f.is_affine:
        return []
    w, v = np.linalg.eig(f.matrix.astype(float))
    if np.max(np.abs(w.imag)) > 1e-12:
        return []
    return [v[:, i].real / np.linalg.norm(v[:, i].real) for i in np.argsort(-np.abs(w.real))]


SEED_SETS = ("default", "axes", "eigen", "singletons")


def arc_seeds(space: str, delta: float, seed_set: str = "default", base: BaseMap | None = None,
              n_samples: int = 9, levels: int = 6) -> list:
    """Seed arcs: segments of lengths delta 2^-j (j = 1..levels) along the
    coordinate axes and the eigendirections of an affine base, centred at a
    few fixed points. "singletons" gives degenerate arcs."""
    if seed_set not in SEED_SETS:
        raise ParameterError(f"seed_set must be one of {SEED_SETS}")
    lengths = [delta * 2.0 ** -j for j in range(1, levels + 1)]
    if space == "interval":
        centres = [0.25, 0.5, 0.75]
        if seed_set == "singletons":
            return [Arc("interval", [[c]]) for c in centres]
        return [segment_arc([c - r / 2], [c + r / 2], n_samples, "interval")
                for r in lengths for c in centres]
    centres = [np.array(c) for c in ((0.5, 0.5), (0.3, 0.7), (0.1234, 0.4321))]
    if seed_set == "singletons":
        return [Arc("torus", c[None, :]) for c in centres]
    dirs = []
    if seed_set in ("default", "axes"):
        dirs += [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    if seed_set in ("default", "eigen") and base is not None:
        for e in eigen_directions(base):
            if all(abs(abs(float(e @ d)) - 1.0) > 1e-9 for d in dirs):
                dirs.append(e)
    return [segment_arc(c - r / 2 * d, c + r / 2 * d, n_samples)
            for r in lengths for d in dirs for c in centres]


def perturbed_family(A: Arc, rng: np.random.Generator, window: float, grid: float = 1.0,
                     amplitude: float = 2.0) -> ReparamFamily:
    """Random time changes near the identity with slopes in [1/4, 4].

    A random guide sample keeps the identity; other samples get
    t + a w_i psi(t), with psi random on a uniform breakpoint grid and w_i
    the signed arclength offset from the guide, then slopes are clipped.
    """
    n = len(A)
    guide = int(rng.integers(n))
    k = int(math.ceil(window / grid))
    bp = np.arange(-k, k + 1) * grid
    psi = rng.uniform(-1.0, 1.0, size=bp.size)
    psi[k] = 0.0
    a = rng.uniform(0.0, amplitude)
    w = A.arclen_params - A.arclen_params[guide]
    raw = bp[None, :] + a * w[:, None] * psi[None, :]
    step = np.clip(np.diff(raw, axis=1), grid / 4.0, 4.0 * grid)
    vals = np.concatenate([np.zeros((n, 1)), np.cumsum(step, axis=1)], axis=1)
    vals -= vals[:, k:k + 1]
    vals[guide] = bp
    return ReparamFamily(bp, vals, guide)


# ----------------------------------------------------------------- searches


def cw_search(flow: FlowHandle, eps: float, delta: float, window: float = 50.0,
              budget: int = 10_000, seed_set: str = "default", rng_seed: int = 0,
              t_step: float = 0.25, n_samples: int = 9) -> CwVerdict:
    """Search arcs and time changes for a violation of cw-expansivity.

    Candidates, in order: the fixed-point construction at every fixed point
    (flows with fixed points), then each seed arc with the identity time
    change, then rounds of seeded random perturbations over all seeds. The
    first candidate that re-verifies is returned.
    """
    if not (eps > 0 and delta > 0 and window > 0):
        raise ParameterError("eps, delta and window must be positive")
    if budget < 1:
        raise ParameterError("the search budget must be positive")
    if flow.kind == "suspension" and not flow.base.is_torus:
        raise UnsupportedSystemError("cw_search needs a torus base or the interval flow")
    census = {"fixed_point_witnesses": 0, "seeds": 0, "perturbation_rounds": 0,
              "candidates": 0, "degenerate": 0, "inside_orbit_segment": 0}
    used = 0

    def verdict(outcome, A=None, alpha=None, sup=None, away=None):
        return CwVerdict(outcome, "flow", flow.name or flow.kind, eps, delta, window, t_step,
                         budget, used, dict(census), A, alpha, sup, away)

    def candidate(A, alpha):
        sup = sup_diameter(flow, A, alpha, window, t_step, stop=delta)
        if sup >= delta:
            return None
        away = orbit_segment_distance(flow, A, alpha.guide_index, eps)
        if away <= A.mesh:
            census["inside_orbit_segment"] += 1
            return None
        v = verdict("counterexample", A, alpha, sup, away)
        return v if verify_counterexample(flow, v) else None

    if flow.has_fixed_points:
        for p in fixed_points(flow):
            if used >= budget:
                break
            try:
                A, alpha = fixed_point_witness(flow, p, delta, eps, window=window)
            except NotApplicableError:
                continue
            used += 1
            census["fixed_point_witnesses"] += 1
            census["candidates"] += 1
            found = candidate(A, alpha)
            if found is not None:
                return found
    space = "interval" if flow.kind == "interval-logistic" else "torus"
    seeds = arc_seeds(space, delta, seed_set, flow.base, n_samples)
    census["seeds"] = len(seeds)
    rnd = 0
    while used < budget:
        for k, A in enumerate(seeds):
            if used >= budget:
                break
            used += 1
            census["candidates"] += 1
            if len(A) == 1:
                census["degenerate"] += 1
                continue
            if rnd == 0:
                alpha = ReparamFamily.identity(len(A), len(A) // 2)
            else:
                rng = np.random.default_rng([rng_seed, k, rnd])
                alpha = perturbed_family(A, rng, window)
            found = candidate(A, alpha)
            if found is not None:
                return found
        rnd += 1
        census["perturbation_rounds"] = rnd
        if all(len(A) == 1 for A in seeds):
            break
    return verdict("no-counterexample")


def fixed_points(flow: FlowHandle) -> list:
    if flow.kind == "interval-logistic":
        return [IntervalPoint(0.0), IntervalPoint(1.0)]
    return []


# ------------------------------------------------------- fixed-point witness


def fixed_point_witness(flow: FlowHandle, p, delta: float, eps: float = 0.5,
                        n_samples: int = 65, window: float = 50.0,
                        t_step: float = 0.05) -> tuple[Arc, ReparamFamily]:
    """Arc A = X^{[0,1]}(x) near a fixed point p with time changes keeping
    every reparametrized image of diameter < delta.

    The guide is the end point X^1(x) and the sample X^u(x) gets h_{1-u},
    h_v = (1 - v) Id + v h. Then the sample's image at time s is
    X^{1 + s}(x) for every s outside (-2, 1), so the images collapse to a
    point there, and inside they stay on X^{(-1, 2]}(x), which lies in the
    delta/2 ball around p.
    """
    if not flow.has_fixed_points:
        raise NotApplicableError(f"{flow.name or flow.kind} has no fixed points")
    if not delta > 0:
        raise ParameterError("delta must be positive")
    px = p.x if isinstance(p, IntervalPoint) else float(p)
    probe = np.linspace(-3.0, 3.0, 25)
    if np.max(np.abs(interval_flow(np.full(probe.size, px), probe) - px)) >= flow.tolerance:
        raise ParameterError(f"{px} is not a fixed point")
    sign = 1.0 if px < 0.5 else -1.0
    times = np.linspace(-3.0, 3.0, 121)
    x = None
    for k in range(1, 13):
        cand = px + sign * delta * 10.0 ** -k
        if not 0.0 < cand < 1.0:
            continue
        orbit = interval_flow(np.full(times.size, cand), times)
        moved = abs(float(interval_flow(cand, 1.0)) - cand)
        if np.max(np.abs(orbit - px)) < delta / 2.0 and moved > flow.tolerance:
            x = cand
            break
    if x is None:
        raise NotApplicableError(f"no regular point stays within delta/2 of {px} on [-3, 3]")
    u = np.linspace(0.0, 1.0, n_samples)
    A = Arc("interval", interval_flow(np.full(n_samples, x), u)[:, None])
    v = 1.0 - u
    alpha = ReparamFamily(np.array([-2.0, 0.0, 1.0]),
                          np.stack([-2.0 + v, np.zeros(n_samples), 1.0 + v], axis=1),
                          n_samples - 1)
    if sup_diameter(flow, A, alpha, window, t_step) >= delta:
        raise NotApplicableError("the construction exceeds delta on the window")
    return A, alpha


# ---------------------------------------------------- discrete time sequences


@dataclass(frozen=True)
class DiscreteReparam:
    """beta(x_i)_j = alpha(x_i)(t_j) on a stored grid t_j, j = -n_neg..n_pos."""

    times: np.ndarray
    values: np.ndarray
    zero_index: int
    guide_index: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(len(self.times)) - self.zero_index

    def max_increment(self) -> float:
        return float(np.max(np.abs(np.diff(self.values, axis=1))))

    def problems(self, delta: float) -> list:
        out = []
        if np.any(self.values[:, self.zero_index] != 0.0):
            out.append("beta(x)_0 must be 0")
        if np.any(np.diff(self.values, axis=1) <= 0):
            out.append("sequences must be increasing")
        if self.max_increment() >= delta:
            out.append("an increment reaches delta")
        return out


def alpha_to_beta(A: Arc, alpha: ReparamFamily, delta: float, span: float = 50.0,
                  max_halvings: int = 60) -> DiscreteReparam:
    """Grid t_0 = 0 < t_1 < ... (and downwards) with every per-sample increment
    |alpha(x)(t_{i+1}) - alpha(x)(t_i)| < delta. Each step tries 0.8 delta
    and halves on failure; the grid stops once it passes +-span."""
    if len(alpha) != len(A):
        raise StructureError("sample count mismatch")
    if not delta > 0 or not span > 0:
        raise ParameterError("delta and span must be positive")

    def walk(sign):
        ts, t, cur = [], 0.0, alpha.evaluate(0.0)
        while abs(t) < span:
            s = 0.8 * delta
            for _ in range(max_halvings + 1):
                nxt = alpha.evaluate(t + sign * s)
                if np.max(np.abs(nxt - cur)) < delta:
                    break
                s /= 2.0
            else:
                raise RangeExhaustedError(f"no admissible grid point after t={t}")
            t += sign * s
            cur = nxt
            ts.append(t)
        return ts

    up, down = walk(1.0), walk(-1.0)
    times = np.array(down[::-1] + [0.0] + up)
    values = np.stack([alpha.evaluate(t) for t in times], axis=1)
    values[:, len(down)] = 0.0
    return DiscreteReparam(times, values, len(down), alpha.guide_index)


# ------------------------------------------------------------ discrete check


def _iterate_diameters(f: BaseMap, A: Arc, n_max: int, delta: float, mesh: float):
    """Forward and backward iterate diameters (sampled, plus image mesh as an
    upper-bound margin), stopping once a sampled diameter reaches delta."""
    out = {0: (arc_diameter(A), A.mesh)}
    for sign in (1, -1):
        cur = A
        for n in range(1, n_max + 1):
            img = Arc("torus", map_chart(f, cur.coords, sign))
            if img.mesh > mesh:
                cur = refine_arc(cur, cur.mesh * mesh / img.mesh * 0.9)
                img = Arc("torus", map_chart(f, cur.coords, sign))
            d = arc_diameter(img)
            out[sign * n] = (d, img.mesh)
            if d >= delta:
                return out, False
            cur = img
    return out, True


def discrete_cw_check(fmap: BaseMap, delta: float, n_max: int, seeds=None,
                      seed_set: str = "default", word_radius: int = 24) -> CwVerdict:
    """Search for a nondegenerate arc whose iterates f^n, |n| <= n_max, all
    have diameter < delta (upper bound: sampled diameter plus image mesh)."""
    if not delta > 0 or n_max < 1:
        raise ParameterError("need delta > 0 and n_max >= 1")
    name = fmap.name or fmap.kind
    if fmap.kind == "full-shift":
        if n_max > word_radius:
            raise PrecisionError(f"n_max={n_max} exceeds the reliable word radius {word_radius}")
        return CwVerdict("no-counterexample", "map", name, 0.0, delta, float(n_max), 1.0, 0, 0,
                         {"seeds": 0, "note": "the shift space has no nondegenerate arcs"},
                         n_max=n_max)
    if seeds is None:
        seeds = arc_seeds("torus", delta, seed_set, fmap)
    census = {"seeds": len(seeds), "degenerate": 0, "expanded": 0}
    used = 0
    for A in seeds:
        used += 1
        if len(A) == 1 or arc_diameter(A) == 0.0:
            census["degenerate"] += 1
            continue
        diams, small = _iterate_diameters(fmap, A, n_max, delta, delta / 16.0)
        if small and max(d + m for d, m in diams.values()) < delta:
            sup = max(d + m for d, m in diams.values())
            return CwVerdict("counterexample", "map", name, 0.0, delta, float(n_max), 1.0,
                             len(seeds), used, dict(census, iterate_bound=sup), A, None, sup,
                             None, n_max)
        census["expanded"] += 1
    return CwVerdict("no-counterexample", "map", name, 0.0, delta, float(n_max), 1.0, len(seeds),
                     used, census, n_max=n_max)


def verify_map_counterexample(fmap: BaseMap, verdict: CwVerdict) -> bool:
    if not verdict.is_counterexample or verdict.kind != "map":
        return False
    diams, small = _iterate_diameters(fmap, verdict.arc, verdict.n_max, verdict.delta,
                                      verdict.delta / 16.0)
    return bool(small and max(d + m for d, m in diams.values()) < verdict.delta
                and arc_diameter(verdict.arc) > 0)


# ----------------------------------------------------------------- transport


def _transport_arc(A: Arc, h: ChartChange) -> Arc:
    img = h.forward(A.coords % 1.0)
    step = np.diff(img, axis=0)
    step -= np.round(step)
    img = np.concatenate([img[:1], img[:1] + np.cumsum(step, axis=0)])
    return Arc("torus", img)


def conjugacy_transport(verdict: CwVerdict, h: ChartChange, system) -> CwVerdict:
    """Carry a verdict through the conjugacy H(x, s) = (h(x), s).

    `system` is the original flow (flow verdicts) or base map (map
    verdicts). H maps orbit segments to orbit segments with the same times,
    so time changes carry over unchanged; chain lengths scale by at most
    max(1, Lip h). A counterexample becomes one at delta max(1, Lip h) and is
    re-verified on the conjugated system; no-counterexample becomes
    no-counterexample at delta / max(1, Lip h^-1).
    """
    if h.lipschitz is None or h.inverse_lipschitz is None:
        raise ParameterError("chart change needs Lipschitz bounds in both directions")
    if h.name == "identity":
        return verdict
    if verdict.kind == "flow":
        if not (isinstance(system, FlowHandle) and system.kind == "suspension"):
            raise UnsupportedSystemError("flow transport needs a torus suspension")
        base = system.base
    else:
        base = system
    new_base = conjugated(base, h)
    new_name = f"{h.name}*{verdict.system}"
    if not verdict.is_counterexample:
        d = verdict.delta / max(1.0, h.inverse_lipschitz)
        return CwVerdict("no-counterexample", verdict.kind, new_name, verdict.eps, d,
                         verdict.window, verdict.t_step, verdict.budget, verdict.consumed,
                         dict(verdict.census, transported_from=verdict.system), n_max=verdict.n_max)
    d = verdict.delta * max(1.0, h.lipschitz)
    A = _transport_arc(verdict.arc, h)
    if verdict.kind == "map":
        out = CwVerdict("counterexample", "map", new_name, verdict.eps, d, verdict.window,
                        verdict.t_step, verdict.budget, verdict.consumed,
                        dict(verdict.census, transported_from=verdict.system), A, None,
                        None, None, verdict.n_max)
        diams, _ = _iterate_diameters(new_base, A, verdict.n_max, d, d / 16.0)
        out = replace(out, sup_diameter=max(a + m for a, m in diams.values()))
        if not verify_map_counterexample(new_base, out):
            raise RuntimeError("transported counterexample failed to re-verify")
        return out
    flow = FlowHandle("suspension", new_base, name=new_name, chain_levels=system.chain_levels)
    sup = sup_diameter(flow, A, verdict.alpha, verdict.window, verdict.t_step)
    away = orbit_segment_distance(flow, A, verdict.alpha.guide_index, verdict.eps)
    out = CwVerdict("counterexample", "flow", new_name, verdict.eps, d, verdict.window,
                    verdict.t_step, verdict.budget, verdict.consumed,
                    dict(verdict.census, transported_from=verdict.system), A, verdict.alpha,
                    sup, away)
    if not verify_counterexample(flow, out):
        raise RuntimeError("transported counterexample failed to re-verify")
    return out
