"""Adequate cross-section pairs, first returns, shadowing and return images.

Sections live on the height-0 slice of a unit-roof suspension. For torus
bases T_i are the half-open cells of a g x g grid (so the T_i tile the slice)
and S_i are concentric closed squares with a margin around each cell. For the
full shift the patches are the cylinders fixing coordinates -r..r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spaces import (
    Arc,
    ParameterError,
    SymbolWord,
    arc_diameter,
    refine_arc,
    torus_metric,
    word_distance,
)
from .systems import (
    FlowHandle,
    SuspensionPoint,
    UnsupportedSystemError,
    apply_map,
    map_chart,
    map_coords,
)


class SectionValidationError(ValueError):
    """A section family failed one of its sampled certifications."""


class SectionDomainError(ValueError):
    """A point is outside the domain of a section operation."""


class ShadowPreconditionError(ValueError):
    """Shadow construction requested for a companion that is too far away."""


DEFAULT_RHO = 0.1
DEFAULT_SHRINK = 0.25


@dataclass(frozen=True)
class SectionFamilyPair:
    """The (S, T) families with their constants.

    geometry is "torus-grid" (fields g, t_margin, s_margin) or
    "shift-cylinder" (field radius).
    """

    geometry: str
    eps: float
    delta: float
    theta: float
    rho: float
    eps0: float
    g: int = 0
    t_margin: float = 0.0
    s_margin: float = 0.0
    radius: int = 0
    height: float = 0.0
    resolution: int = 0
    covering: dict = field(default_factory=dict)

    @property
    def cell(self) -> float:
        return 1.0 / self.g

    @property
    def count(self) -> int:
        if self.geometry == "torus-grid":
            return self.g * self.g
        return 2 ** (2 * self.radius + 1)

    @property
    def S(self) -> list:
        return self._patches(self.s_margin)

    @property
    def T(self) -> list:
        return self._patches(self.t_margin)

    def _patches(self, margin: float) -> list:
        if self.geometry == "shift-cylinder":
            r = self.radius
            return [{"height": self.height, "cylinder": tuple((i >> (2 * r - j)) & 1 for j in range(2 * r + 1))}
                    for i in range(self.count)]
        c = self.cell
        return [{"height": self.height, "center": ((a + 0.5) * c, (b + 0.5) * c), "half_side": c / 2 + margin}
                for a in range(self.g) for b in range(self.g)]

    def patch_diameter(self, which: str = "S") -> float:
        if self.geometry == "shift-cylinder":
            return 2.0 ** (-(self.radius + 1))
        margin = self.s_margin if which == "S" else self.t_margin
        return math.sqrt(2.0) * (self.cell + 2 * margin)

    def constants(self) -> dict:
        return {"eps": self.eps, "delta": self.delta, "theta": self.theta,
                "rho": self.rho, "eps0": self.eps0}


# ---------------------------------------------------------------- geometry


def tile_index(pair: SectionFamilyPair, coords: np.ndarray) -> np.ndarray:
    """Index of the grid cell containing each torus point (the canonical T patch)."""
    c = np.asarray(coords, float) % 1.0
    ab = np.floor(c * pair.g).astype(np.int64) % pair.g
    return ab[..., 0] * pair.g + ab[..., 1]


def patch_offset(pair: SectionFamilyPair, coords: np.ndarray, index) -> np.ndarray:
    """Wrapped displacement of points from the centre of patch `index`."""
    index = np.asarray(index)
    a, b = index // pair.g, index % pair.g
    centre = np.stack([(a + 0.5) * pair.cell, (b + 0.5) * pair.cell], axis=-1)
    d = (np.asarray(coords, float) - centre) % 1.0
    return np.where(d >= 0.5, d - 1.0, d)


def in_patch(pair: SectionFamilyPair, coords: np.ndarray, index, which: str = "S") -> np.ndarray:
    """Closed-square membership (half-open cells when the T margin is zero)."""
    off = patch_offset(pair, coords, index)
    if which == "T" and pair.t_margin == 0.0:
        return np.asarray(tile_index(pair, coords) == index)
    half = pair.cell / 2 + (pair.s_margin if which == "S" else pair.t_margin)
    return np.all(np.abs(off) <= half + 1e-12, axis=-1)


def cylinder_index(pair: SectionFamilyPair, word: SymbolWord) -> int:
    r = pair.radius
    bits = [word.symbol(i) for i in range(-r, r + 1)]
    return int("".join(map(str, bits)), 2)


def locate(pair: SectionFamilyPair, base, which: str = "T") -> int:
    """Index of a patch on the slice containing `base`, or -1."""
    if pair.geometry == "shift-cylinder":
        return cylinder_index(pair, base)
    xy = np.array([base.x, base.y]) if hasattr(base, "x") else np.asarray(base, float)
    i = int(tile_index(pair, xy))
    return i if bool(in_patch(pair, xy, i, which)) else -1


def _base_array(p) -> np.ndarray:
    return np.array([p.x, p.y])


def _section_distance(a, b) -> float:
    if isinstance(a, SymbolWord):
        return word_distance(a, b)
    return float(torus_metric(_base_array(a), _base_array(b)))


# ---------------------------------------------------------------- building


def _torus_lattice(side: int) -> np.ndarray:
    i = (np.arange(side) + 0.5) / side
    return np.stack(np.meshgrid(i, i, indexing="ij"), axis=-1).reshape(-1, 2)


def calibrate_eps0_torus(flow: FlowHandle, g: int, t_margin: float, s_margin: float,
                         delta: float, resolution: int, directions: int = 16) -> float:
    """Largest dyadic eps0 whose compatibility condition holds on sampled pairs.

    Condition: d(x, y) < eps0, |t| < 3 delta and X^t(x) in T_j imply
    X^t(y) in D_rho^j. On a height-0 slice only integer t can land on a
    section, and there D_rho^j meets the slice in S_j.
    """
    probe = SectionFamilyPair("torus-grid", 1.0, delta, 1.0, DEFAULT_RHO, 0.0, g=g,
                              t_margin=t_margin, s_margin=s_margin)
    # sample x near every cell, including points on the cell boundaries
    side = max(resolution, 4)
    corners = np.stack(np.meshgrid(np.arange(g) / g, np.arange(g) / g, indexing="ij"), axis=-1).reshape(-1, 2)
    xs = np.concatenate([_torus_lattice(side), corners + 1e-12, corners - 1e-12])
    times = [k for k in range(-int(math.ceil(3 * delta)), int(math.ceil(3 * delta)) + 1) if abs(k) < 3 * delta]
    ang = 2 * np.pi * np.arange(directions) / directions
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    for k in range(1, 40):
        eps0 = 2.0 ** -k
        ok = True
        for d in dirs:
            ys = xs + 0.999 * eps0 * d
            for t in times:
                fx = map_coords(flow.base, xs, t) if t else xs % 1.0
                fy = map_coords(flow.base, ys, t) if t else ys % 1.0
                j = tile_index(probe, fx)
                if not np.all(in_patch(probe, fy, j, "S")):
                    ok = False
                    break
                if t_margin > 0 and not _enlarged_compatible(probe, fx, fy):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return eps0
    raise SectionValidationError("no dyadic eps0 satisfies the compatibility condition")


def _enlarged_compatible(pair: SectionFamilyPair, fx: np.ndarray, fy: np.ndarray) -> bool:
    """For overlapping T patches check every patch containing fx, not only its tile."""
    reach = int(math.ceil(pair.t_margin / pair.cell))
    base = tile_index(pair, fx)
    a, b = base // pair.g, base % pair.g
    for da in range(-reach, reach + 1):
        for db in range(-reach, reach + 1):
            j = ((a + da) % pair.g) * pair.g + (b + db) % pair.g
            inside_t = in_patch(pair, fx, j, "T")
            inside_s = in_patch(pair, fy, j, "S")
            if np.any(inside_t & ~inside_s):
                return False
    return True


def covering_report(pair: SectionFamilyPair, flow: FlowHandle, resolution: int,
                    heights=(0.0, 0.25, 0.5, 0.75, 0.999)) -> dict:
    """Sampled check of the four covering identities of a section pair.

    X^{[0, eps]}(T) = M, X^{[-eps, 0]}(T) = M and the same for S, tested on
    a base lattice times a set of heights.
    """
    if pair.geometry == "shift-cylinder":
        # cylinders of a fixed radius partition the shift space
        return {name: True for name in ("T_forward", "T_backward", "S_forward", "S_backward")}
    pts = _torus_lattice(resolution)
    report = {}
    for which in ("T", "S"):
        fwd, bwd = True, True
        for h in heights:
            # forward: the orbit reaches the slice after 1 - h (or at 0 if h = 0)
            landing = pts if h == 0.0 else map_coords(flow.base, pts, 1)
            if 1.0 - h > pair.eps and h != 0.0:
                fwd = False
            fwd &= bool(np.all(in_patch(pair, landing, tile_index(pair, landing), which)))
            # backward: the orbit reaches the slice after time h
            if h > pair.eps:
                bwd = False
            bwd &= bool(np.all(in_patch(pair, pts, tile_index(pair, pts), which)))
        report[f"{which}_forward"] = fwd
        report[f"{which}_backward"] = bwd
    return report


def _first_hit_theta(pair: SectionFamilyPair, flow: FlowHandle, resolution: int) -> float:
    """Smallest sampled positive time between consecutive hits of the slice sections."""
    if pair.geometry == "shift-cylinder":
        return 1.0
    pts = _torus_lattice(resolution)
    nxt = map_coords(flow.base, pts, 1)
    hit = in_patch(pair, nxt, tile_index(pair, nxt), "S")
    if not np.all(hit):
        raise SectionValidationError("some slice point never returns to the sections within one roof time")
    # the next hit of the slice is at time 1 exactly for a unit roof
    return 1.0


def build_pair(flow: FlowHandle, delta: float, shrink: float = DEFAULT_SHRINK,
               rho: float = DEFAULT_RHO, resolution: int = 64) -> SectionFamilyPair:
    """δ-adequate pair on the height-0 slice, validated on a sample lattice."""
    if flow.kind != "suspension":
        raise UnsupportedSystemError("sections need a suspension flow (no fixed points)")
    if not delta > 0:
        raise SectionValidationError("delta must be positive")
    if flow.base.kind == "full-shift":
        return _build_shift_pair(flow, delta, rho)
    if not 0 < shrink < 1:
        raise ParameterError("shrink must lie in (0, 1)")
    side_s = delta / math.sqrt(2.0)
    g = int(math.ceil(1.0 / (shrink * side_s)))
    c = 1.0 / g
    s_margin = c * (1.0 / shrink - 1.0) / 2.0
    if c + 2 * s_margin >= 0.5:
        raise SectionValidationError("patches too large to be injective cross-sections; lower delta")
    return _finish_torus_pair(flow, delta, g, 0.0, s_margin, rho, resolution)


def _finish_torus_pair(flow, delta, g, t_margin, s_margin, rho, resolution):
    eps = 1.0
    probe = SectionFamilyPair("torus-grid", eps, delta, 1.0, rho, 0.0, g=g,
                              t_margin=t_margin, s_margin=s_margin, resolution=resolution)
    theta = _first_hit_theta(probe, flow, resolution)
    if not (5 * rho < eps and 2 * rho < theta):
        raise SectionValidationError(f"rho={rho} violates 5 rho < eps and 2 rho < theta")
    if probe.patch_diameter("S") > delta + 1e-12:
        raise SectionValidationError("patch diameter exceeds delta")
    eps0 = calibrate_eps0_torus(flow, g, t_margin, s_margin, delta, min(resolution, 64))
    pair = SectionFamilyPair("torus-grid", eps, delta, theta, rho, eps0, g=g, t_margin=t_margin,
                             s_margin=s_margin, resolution=resolution)
    cover = covering_report(pair, flow, resolution)
    pair = SectionFamilyPair("torus-grid", eps, delta, theta, rho, eps0, g=g, t_margin=t_margin,
                             s_margin=s_margin, resolution=resolution, covering=cover)
    if not all(cover.values()):
        raise SectionValidationError(f"covering check failed: {cover}")
    return pair


def _build_shift_pair(flow, delta, rho):
    # cylinder fixing -r..r has diameter 2^-(r+1)
    r = max(0, int(math.ceil(-math.log2(delta))) - 1)
    # compatibility: d(x, y) < eps0 must keep y in the cylinder of x
    eps0 = 2.0 ** -r
    pair = SectionFamilyPair("shift-cylinder", 1.0, delta, 1.0, rho, eps0, radius=r,
                             resolution=2 ** (2 * r + 1))
    cover = covering_report(pair, flow, 0)
    return SectionFamilyPair("shift-cylinder", 1.0, delta, 1.0, rho, eps0, radius=r,
                             resolution=pair.resolution, covering=cover)


def validation_report(pair: SectionFamilyPair) -> dict:
    return {
        "constants": pair.constants(),
        "covering": dict(pair.covering),
        "inequalities": {"5rho<eps": 5 * pair.rho < pair.eps, "2rho<theta": 2 * pair.rho < pair.theta},
        "geometry": pair.geometry,
        "patches": pair.count,
        "patch_diameter": pair.patch_diameter("S"),
        "lattice_resolution": pair.resolution,
    }


# ----------------------------------------------------------- return dynamics


def _on_slice(pair: SectionFamilyPair, x: SuspensionPoint, tol: float = 1e-9) -> bool:
    return min(x.height, 1.0 - x.height) <= tol


def first_return(pair: SectionFamilyPair, flow: FlowHandle, x: SuspensionPoint):
    """(φ(x), t) for x on ∪T_i; the next slice hit is one roof time later."""
    if not _on_slice(pair, x) or locate(pair, x.base, "T") < 0:
        raise SectionDomainError("point is not on any T patch")
    y = suspension_flow_to_slice(flow, x, 1.0)
    if locate(pair, y.base, "T") < 0:
        raise SectionDomainError("return point is not on any T patch")
    return y, 1.0


def suspension_flow_to_slice(flow: FlowHandle, x: SuspensionPoint, t: float) -> SuspensionPoint:
    base = x.base
    k = int(round(x.height + t))
    if k:
        base = apply_map(flow.base, base, k)
    return SuspensionPoint(base, 0.0)


def project_P_rho(pair: SectionFamilyPair, flow: FlowHandle, x: SuspensionPoint, i: int):
    """(P_ρ^i(x), t): the crossing of S_i within flow time |t| < ρ."""
    h = x.height
    if h < pair.rho:
        t, base = -h, x.base
    elif 1.0 - h < pair.rho:
        t, base = 1.0 - h, apply_map(flow.base, x.base, 1)
    else:
        raise SectionDomainError("point is not within flow time rho of the slice")
    if pair.geometry == "shift-cylinder":
        inside = cylinder_index(pair, base) == i
    else:
        inside = bool(in_patch(pair, _base_array(base), i, "S"))
    if not inside:
        raise SectionDomainError(f"point does not cross S_{i} within flow time rho")
    return SuspensionPoint(base, 0.0), t


@dataclass(frozen=True)
class ReturnOrbit:
    anchor: SuspensionPoint
    companion: SuspensionPoint
    entries: list
    status: str
    diverged_at: int | None = None


def shadow_sequence(pair: SectionFamilyPair, flow: FlowHandle, x: SuspensionPoint,
                    y: SuspensionPoint, n: int) -> ReturnOrbit:
    """Companion points y^x_j on the orbit of y following the φ-orbit of x.

    Each step flows the previous companion by the return time of x and
    projects it into the section visited by φ^j(x). Stops with status
    "diverged" at the first j where the projection is undefined or
    d(φ^j(x), y^x_j) >= eps0.
    """
    if locate(pair, x.base, "T") < 0:
        raise SectionDomainError("anchor is not on any T patch")
    if _section_distance(x.base, y.base) >= pair.eps0:
        raise ShadowPreconditionError("companion is not within eps0 of the anchor")
    sign = 1 if n >= 0 else -1
    entries = [(0, y, 0.0)]
    xj, yj = x, y
    for j in range(1, abs(n) + 1):
        try:
            xj_next, tau = first_return(pair, flow, xj) if sign > 0 else _previous_return(pair, flow, xj)
            lj = locate(pair, xj_next.base, "T")
            moved = flow.flow(yj, sign * tau)
            yj_next, t = project_P_rho(pair, flow, moved, lj)
        except SectionDomainError:
            return ReturnOrbit(x, y, entries, "diverged", sign * j)
        if _section_distance(xj_next.base, yj_next.base) >= pair.eps0:
            return ReturnOrbit(x, y, entries, "diverged", sign * j)
        entries.append((sign * j, yj_next, t))
        xj, yj = xj_next, yj_next
    return ReturnOrbit(x, y, entries, "complete", None)


def _previous_return(pair, flow, x):
    if locate(pair, x.base, "T") < 0:
        raise SectionDomainError("point is not on any T patch")
    y = suspension_flow_to_slice(flow, x, -1.0)
    if locate(pair, y.base, "T") < 0:
        raise SectionDomainError("previous return is not on any T patch")
    return y, 1.0


def phi_orbit(pair: SectionFamilyPair, flow: FlowHandle, x: SuspensionPoint, n: int) -> list:
    out = [x]
    for _ in range(abs(n)):
        x = (first_return(pair, flow, x) if n > 0 else _previous_return(pair, flow, x))[0]
        out.append(x)
    return out


# ------------------------------------------------------- continua on sections


@dataclass(frozen=True)
class ReturnImage:
    """Image φ^n(A, x) with per-step diameters; overflow_step marks growth overflow."""

    arc: Arc
    anchor: int
    diameters: tuple
    overflow_step: int | None = None

    @property
    def ok(self) -> bool:
        return self.overflow_step is None


def _check_section_arc(pair: SectionFamilyPair, A: Arc, anchor: int) -> int:
    if pair.geometry != "torus-grid" or A.kind != "torus":
        raise UnsupportedSystemError("continua on sections are supported for torus bases")
    if not 0 <= anchor < len(A):
        raise IndexError("anchor out of range")
    j = int(tile_index(pair, A.coords[anchor]))
    if not np.all(in_patch(pair, A.coords, j, "S")):
        raise SectionDomainError("arc is not contained in the S patch of its anchor")
    return j


def _recentre(coords: np.ndarray, anchor: int) -> np.ndarray:
    return coords - np.floor(coords[anchor])


def return_step(pair: SectionFamilyPair, flow: FlowHandle, A: Arc, anchor: int, sign: int,
                mesh: float) -> tuple[Arc, bool, int]:
    """One return φ^{±1}(A, x): flow each sample to the slice and project into
    the S patch of the anchor's image. Returns (image, projection_ok, anchor)."""
    src = A
    for _ in range(30):
        img = map_chart(flow.base, src.coords, sign)
        step = np.max(np.linalg.norm(np.diff(img, axis=0), axis=1)) if len(src) > 1 else 0.0
        if step <= mesh:
            break
        keep = src.coords[anchor]
        src = refine_arc(src, max(src.mesh * mesh / step * 0.9, 1e-15))
        anchor = int(np.argmin(np.linalg.norm(src.coords - keep, axis=1)))
    img = _recentre(img, anchor)
    out = Arc("torus", img)
    j = int(tile_index(pair, img[anchor]))
    ok = bool(np.all(in_patch(pair, img, j, "S")))
    return out, ok, anchor


def return_continuum(pair: SectionFamilyPair, flow: FlowHandle, A: Arc, anchor: int, n: int,
                     limit: float | None = None, mesh: float | None = None) -> ReturnImage:
    """φ^n(A, x) built step by step with adaptive refinement.

    Stops softly (overflow_step set) when an image reaches diameter `limit`
    (default eps0) or leaves the S patch of the anchor's image.
    """
    _check_section_arc(pair, A, anchor)
    limit = pair.eps0 if limit is None else limit
    mesh = pair.eps0 / 16 if mesh is None else mesh
    sign = 1 if n >= 0 else -1
    diams = [arc_diameter(A)]
    cur, a = Arc("torus", _recentre(A.coords, anchor)), anchor
    for j in range(1, abs(n) + 1):
        if len(cur) == 1:
            cur = Arc("torus", _recentre(map_chart(flow.base, cur.coords, sign), 0))
            diams.append(0.0)
            continue
        cur, ok, a = return_step(pair, flow, cur, a, sign, mesh)
        d = arc_diameter(cur)
        diams.append(d)
        if d >= limit or not ok:
            return ReturnImage(cur, a, tuple(diams), sign * j)
    return ReturnImage(cur, a, tuple(diams), None)


@dataclass(frozen=True)
class Membership:
    verdict: str
    forward: tuple
    backward: tuple
    forward_overflow: int | None
    backward_overflow: int | None


def _membership_trace(pair, flow, A, anchor, n, eta, extend):
    """Diameters of φ^k(A, x) for k up to n, continued past n while they are
    still strictly increasing (at most `extend` more steps)."""
    img = return_continuum(pair, flow, A, anchor, n)
    diams, over = list(img.diameters), img.overflow_step
    sign = 1 if n >= 0 else -1
    cur = img
    for _ in range(extend):
        if over is not None or len(diams) < 2 or not diams[-2] * (1 + 1e-9) < diams[-1] < eta:
            break
        cur = return_continuum(pair, flow, cur.arc, cur.anchor, sign)
        diams.append(cur.diameters[-1])
        if not cur.ok:
            over = sign * (len(diams) - 1)
    return tuple(diams), over


def stable_membership(pair: SectionFamilyPair, flow: FlowHandle, A: Arc, anchor: int,
                      eta: float, n_max: int, extend: int = 64) -> Membership:
    """Sampled W^s_η / W^u_η membership from forward/backward return diameters.

    Every |n| <= n_max is checked; a trace still growing at n_max is followed
    further (up to `extend` steps) so that a slowly expanding component is not
    mistaken for a member by the finite horizon.
    """
    if not eta < pair.eps0:
        raise ParameterError("eta must be below eps0")
    fwd, fwd_over = _membership_trace(pair, flow, A, anchor, n_max, eta, extend)
    bwd, bwd_over = _membership_trace(pair, flow, A, anchor, -n_max, eta, extend)
    in_s = fwd_over is None and max(fwd) < eta
    in_u = bwd_over is None and max(bwd) < eta
    verdict = {(True, True): "both", (True, False): "in-W^s", (False, True): "in-W^u",
               (False, False): "neither"}[(in_s, in_u)]
    return Membership(verdict, fwd, bwd, fwd_over, bwd_over)


# ------------------------------------------------------------ triple families


@dataclass(frozen=True)
class TripleFamilies:
    pairs: tuple
    theta_prime: float

    @property
    def hop_bound(self) -> int:
        return int(math.floor(self.pairs[0].eps / self.theta_prime + 1e-12))


def build_triple(flow: FlowHandle, delta: float, shrink: float = DEFAULT_SHRINK,
                 inner: float = 1.0 / 3.0, rho: float = DEFAULT_RHO,
                 resolution: int = 64) -> TripleFamilies:
    """Three pairs with T¹ = T², T³ = S², S¹ = S³, hence T¹ ⊆ S² ⊆ S¹.

    T¹ are the grid cells, S¹ the enlarged squares of `build_pair`, and S²
    the intermediate squares with margin `inner` times the S¹ margin.
    """
    p1 = build_pair(flow, delta, shrink, rho, resolution)
    if p1.geometry != "torus-grid":
        raise UnsupportedSystemError("triple families are built for torus bases")
    m1 = p1.s_margin
    m2 = inner * m1
    p2 = _finish_torus_pair(flow, delta, p1.g, 0.0, m2, rho, resolution)
    p3 = _finish_torus_pair(flow, delta, p1.g, m2, m1, rho, resolution)
    theta_prime = _theta_prime(p2, p1, flow, resolution)
    return TripleFamilies((p1, p2, p3), theta_prime)


def _theta_prime(p2, p1, flow, resolution) -> float:
    """Smallest sampled first-hit time from ∪S² to ∪T¹ (strictly positive times)."""
    pts = _torus_lattice(resolution)
    best = math.inf
    cur = pts
    for k in range(1, 4):
        cur = map_coords(flow.base, cur, 1)
        hit = in_patch(p1, cur, tile_index(p1, cur), "T")
        if np.any(hit):
            best = min(best, float(k))
        if np.all(hit):
            break
    return best


def varphi_return(triple: TripleFamilies, flow: FlowHandle, x: SuspensionPoint):
    """(ϕ(x), t, hops): first hit of ∪T¹ from x on ∪S², counting T³ crossings."""
    p1, p2, p3 = triple.pairs
    if not _on_slice(p2, x) or locate(p2, x.base, "S") < 0:
        raise SectionDomainError("point is not on any S² patch")
    hops = 0
    cur = x
    for k in range(1, 64):
        cur = suspension_flow_to_slice(flow, cur, 1.0)
        if locate(p3, cur.base, "T") >= 0:
            hops += 1
        if locate(p1, cur.base, "T") >= 0:
            return cur, float(k), hops
    raise SectionDomainError("no hit of the T¹ family within 64 roof times")
