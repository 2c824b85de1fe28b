"""Growth control for unstable continua and the binary witness tree.

A node arc D of diameter delta1/3 is trimmed to a sub-arc B whose N-fold
return image has a prescribed diameter with every intermediate image below
eps0. The two end pieces of that image, each of diameter delta1/3, are the
children. After m levels the 2^m leaf points, pulled back to the root, form
a separated set for the section returns, which bounds the entropy below by
log 2 / (N * hop).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sections import (
    SectionFamilyPair,
    TripleFamilies,
    return_continuum,
)
from .spaces import (
    Arc,
    ParameterError,
    arc_diameter,
    chart_metric,
    locate_sample,
    segment_arc,
    sub_arc,
)
from .systems import FlowHandle, map_coords


class InconclusiveError(RuntimeError):
    """Raised when no trial reaches the calibration window."""


class SplitFailure(RuntimeError):
    """Raised when bisection cannot bracket or meet the growth target."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


class NotFoundError(RuntimeError):
    """Raised when no seed yields an expanding continuum."""


class ConstructionFailure(RuntimeError):
    """Raised when a tree node's image cannot host two separated children."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------- calibration


@dataclass(frozen=True)
class Calibration:
    delta0: float
    witness_min: float
    hits: int


def calibrate_delta0(pair: SectionFamilyPair, flow: FlowHandle, eps0: float, trials: int,
                     n_max: int = 12, seed: int = 0) -> Calibration:
    """Largest dyadic delta0 with diam φ^n(A) >= delta0 whenever the sup of
    diam φ^i(A), i = 1..n, lands in [eps0, 2 eps0].

    Trial arcs are short segments with seeded random centres, directions and
    lengths in [eps0/64, eps0/4]. Steps where an image leaves its S patch end
    the trial.
    """
    if not 0 < eps0 <= pair.eps0:
        raise ParameterError(f"eps0 must lie in (0, {pair.eps0}]")
    if trials < 1:
        raise InconclusiveError("no trials requested")
    rng = np.random.default_rng(seed)
    side = 1.0 / pair.g
    witness = math.inf
    hits = 0
    for _ in range(trials):
        cell = rng.integers(0, pair.g, size=2)
        centre = (cell + rng.uniform(0.0, 1.0, size=2)) * side
        angle = rng.uniform(0.0, math.pi)
        length = eps0 * 2.0 ** rng.uniform(-6.0, -2.0)
        u = np.array([math.cos(angle), math.sin(angle)]) * length / 2.0
        A = segment_arc(centre - u, centre + u, 3)
        img = return_continuum(pair, flow, A, 1, n_max, limit=2.0 * eps0)
        d = img.diameters
        last = len(d) - 1 if img.ok else len(d) - 2
        running = 0.0
        for n in range(1, last + 1):
            running = max(running, d[n])
            if eps0 <= running <= 2.0 * eps0:
                witness = min(witness, d[n])
                hits += 1
    if hits == 0:
        raise InconclusiveError("no trial reached the window [eps0, 2 eps0]")
    delta0 = 2.0 ** math.floor(math.log2(min(witness, eps0)))
    return Calibration(delta0, witness, hits)


# ------------------------------------------------------------------ splitting


@dataclass(frozen=True)
class SplitResult:
    arc: Arc
    anchor: int
    r: float
    steps: int
    terminal_diameter: float
    diameters: tuple


def _sub_with_anchor(A: Arc, r: float, anchor: int) -> tuple[Arc, int]:
    B = sub_arc(A, r, anchor)
    return B, locate_sample(B, A.coords[anchor])


def growth_split(pair: SectionFamilyPair, flow: FlowHandle, A: Arc, anchor: int, N: int,
                 delta0: float, eps0: float, tol: float = 1e-6, max_steps: int = 60) -> SplitResult:
    """Sub-arc B of A around the anchor with diam φ^N(B) = delta0 (relative
    tolerance `tol`) and diam φ^j(B) <= eps0 for j = 1..N.

    Bisection over the nested family r -> sub_arc(A, r, anchor); an image
    that leaves its S patch counts as overshooting.
    """
    if N < 1:
        raise ParameterError("N must be positive")
    if not 0 < delta0 <= eps0:
        raise ParameterError("need 0 < delta0 <= eps0")

    def terminal(r):
        B, a = _sub_with_anchor(A, r, anchor)
        img = return_continuum(pair, flow, B, a, N, limit=math.inf)
        return (img.diameters[-1] if img.ok else math.inf), img, B, a

    top, img, _, _ = terminal(1.0)
    if top < delta0:
        raise SplitFailure("full arc does not reach the target diameter",
                           {"terminal_at_r1": top, "delta0": delta0, "N": N})
    lo, hi = 0.0, 1.0
    for step in range(1, max_steps + 1):
        r = 0.5 * (lo + hi)
        d, img, B, a = terminal(r)
        if abs(d - delta0) <= tol * delta0:
            inter = max(img.diameters[1:N], default=0.0)
            if inter > eps0:
                raise SplitFailure("intermediate image exceeds eps0",
                                   {"r": r, "intermediate": inter, "eps0": eps0})
            return SplitResult(B, a, r, step, d, img.diameters)
        if d < delta0:
            lo = r
        else:
            hi = r
    raise SplitFailure("bisection did not converge",
                       {"bracket": (lo, hi), "delta0": delta0, "steps": max_steps})


# ------------------------------------------------------ unstable continua


@dataclass(frozen=True)
class UnstableContinuum:
    arc: Arc
    anchor: int
    backward: tuple
    seed_index: int


def find_unstable_continuum(pair: SectionFamilyPair, flow: FlowHandle, seeds, delta0: float,
                            eps0: float, n_max: int = 8, depth: int | None = None,
                            tol: float = 1e-6) -> UnstableContinuum:
    """Renormalised forward image with diameter delta0 whose backward
    returns stay below eps0 for n = 1..n_max.

    Each seed (arc, anchor) is shrunk around its anchor until its image
    after `depth` returns (default 2 n_max) has diameter delta0; forward
    expansion over many steps aligns that image with the expanding
    direction. Seeds that never reach delta0 are skipped.
    """
    depth = 2 * n_max if depth is None else depth
    for k, (A, anchor) in enumerate(seeds):
        if len(A) < 2 or arc_diameter(A) == 0.0:
            continue
        try:
            split = growth_split(pair, flow, A, anchor, depth, delta0, eps0, tol)
        except SplitFailure:
            continue
        img = return_continuum(pair, flow, split.arc, split.anchor, depth, limit=math.inf)
        back = return_continuum(pair, flow, img.arc, img.anchor, -n_max)
        if back.ok and max(back.diameters[1:], default=0.0) < eps0:
            return UnstableContinuum(img.arc, img.anchor, back.diameters, k)
    raise NotFoundError("no seed expands to delta0 under forward returns")


def trim_to_diameter(A: Arc, anchor: int, target: float, tol: float = 1e-6) -> tuple[Arc, int]:
    """Sub-arc around the anchor with diameter `target` (relative tol)."""
    if arc_diameter(A) < target * (1 - tol):
        raise ParameterError("arc is smaller than the target diameter")
    lo, hi = 0.0, 1.0
    for _ in range(80):
        r = 0.5 * (lo + hi)
        B, a = _sub_with_anchor(A, r, anchor)
        d = arc_diameter(B)
        if abs(d - target) <= tol * target:
            return B, a
        lo, hi = (r, hi) if d < target else (lo, r)
    return B, a


def _end_piece(C: Arc, target: float, last: bool, tol: float) -> tuple[Arc, int]:
    B, _ = trim_to_diameter(C, len(C) - 1 if last else 0, target, tol)
    return B, len(B) // 2


def set_distance(kind: str, P: np.ndarray, Q: np.ndarray) -> float:
    return float(np.min(chart_metric(kind, P[:, None, :], Q[None, :, :])))


# --------------------------------------------------------------- witness tree


@dataclass(frozen=True)
class TreeNode:
    path: str
    arc: Arc
    anchor: int
    split: SplitResult | None = None
    image_diameter: float = 0.0
    sibling_distance: float | None = None


@dataclass(frozen=True)
class WitnessTree:
    root: Arc
    nodes: dict
    leaves: np.ndarray
    chains: np.ndarray
    m: int
    N: int
    delta1: float
    hop: int
    target: float
    eps0: float
    checks: dict = field(default_factory=dict)

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)


def build_witness_tree(triple: TripleFamilies, flow: FlowHandle, A: Arc, anchor: int, m: int,
                       N: int, delta1: float, delta0: float | None = None,
                       tol: float = 1e-6) -> WitnessTree:
    """Binary tree of depth m over the unstable arc A.

    Every node has diameter delta1/3. Its sub-arc B reaches image diameter
    `delta0` after N returns (default midway between delta1 and eps0), and
    the two end pieces of that image are the children. Leaf anchors are
    pulled back through mN returns to give the points b(i_1..i_m) on A, and
    `chains[i, k]` is the image of leaf i after kN returns.
    """
    pair = triple.pairs[0]
    eps0 = pair.eps0
    if m < 1 or N < 1:
        raise ParameterError("m and N must be positive")
    if not 0 < delta1 < eps0:
        raise ParameterError(f"delta1 must lie in (0, eps0={eps0})")
    target = 0.5 * (delta1 + eps0) if delta0 is None else delta0
    if not delta1 <= target <= eps0:
        raise ParameterError("the image diameter must lie in [delta1, eps0]")
    piece = delta1 / 3.0
    root, a = trim_to_diameter(A, anchor, piece, tol)
    nodes = {"": TreeNode("", root, a)}
    level = [""]
    for _ in range(m):
        nxt = []
        for path in level:
            node = nodes[path]
            try:
                split = growth_split(pair, flow, node.arc, node.anchor, N, target, eps0, tol)
            except SplitFailure as exc:
                raise ConstructionFailure(f"node {path or 'root'}: {exc}",
                                          {"path": path, **exc.diagnostics}) from exc
            img = return_continuum(pair, flow, split.arc, split.anchor, N, limit=math.inf)
            C = img.arc
            kids = [_end_piece(C, piece, last, tol) for last in (False, True)]
            gap = set_distance("torus", kids[0][0].coords, kids[1][0].coords)
            if gap < piece * (1 - tol):
                raise ConstructionFailure(f"node {path or 'root'}: children closer than delta1/3",
                                          {"path": path, "gap": gap,
                                           "image_diameter": img.diameters[-1]})
            nodes[path] = TreeNode(path, node.arc, node.anchor, split, img.diameters[-1])
            for bit, (arc, ka) in zip("01", kids):
                nodes[path + bit] = TreeNode(path + bit, arc, ka, sibling_distance=gap)
                nxt.append(path + bit)
        level = nxt
    ends = np.array([nodes[p].arc.coords[nodes[p].anchor] for p in level]) % 1.0
    chains = np.empty((len(level), m + 1, 2))
    chains[:, m] = ends
    for k in range(m - 1, -1, -1):
        chains[:, k] = map_coords(flow.base, chains[:, k + 1], -N)
    leaves = chains[:, 0]
    checks = _tree_checks(nodes, level, chains, root, piece, N, tol)
    return WitnessTree(root, nodes, leaves, chains, m, N, delta1, triple.hop_bound, target,
                       eps0, checks)


def distance_to_polyline(A: Arc, point: np.ndarray) -> float:
    """Torus distance from a point to the chart polyline of a torus arc."""
    c = A.coords
    p = point + np.round(c[0] - point)
    if len(c) == 1:
        return float(chart_metric("torus", c[0], point))
    a, b = c[:-1], c[1:]
    ab = b - a
    den = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    s = np.clip(np.sum((p - a) * ab, axis=1) / den, 0.0, 1.0)
    return float(np.min(chart_metric("torus", a + s[:, None] * ab, p)))


def _tree_checks(nodes, leaves, chains, root, piece, N, tol) -> dict:
    """Re-verify the tree invariants: node diameters, sibling gaps, leaf
    chains passing through every ancestor arc."""
    diam = np.array([arc_diameter(n.arc) for n in nodes.values()])
    gaps = [n.sibling_distance for n in nodes.values() if n.sibling_distance is not None]
    worst = 0.0
    for i, path in enumerate(leaves):
        for k in range(len(path) + 1):
            worst = max(worst, distance_to_polyline(nodes[path[:k]].arc, chains[i, k]))
    return {
        "node_diameter_max_rel_error": float(np.max(np.abs(diam - piece)) / piece),
        "sibling_distance_min": float(min(gaps)),
        "chain_offset_max": worst,
        "root_diameter": arc_diameter(root),
    }


# -------------------------------------------------------------- verification


@dataclass(frozen=True)
class SeparationReport:
    ok: bool
    bound: float
    pairs_checked: int
    steps: int
    gamma: float
    min_separation: float
    latest_first_step: int
    offending: tuple | None = None


def verify_separated(tree: WitnessTree, pair3: SectionFamilyPair, flow: FlowHandle) -> SeparationReport:
    """Check that every pair of leaves is (n, delta1/3)-separated for the
    section returns of `pair3`, n = m * N * hop.

    On a unit-roof slice the return map is the base map and a companion's
    shadow is its own base orbit while it stays eps0-close, so a pair is
    separated once some d(f^i b, f^i b') >= gamma with i <= n (a shadow that
    drifts eps0 away has already crossed gamma < eps0).
    """
    gamma = tree.delta1 / 3.0
    if not gamma < pair3.eps0:
        raise ParameterError("delta1/3 must be below eps0 of the verification pair")
    n = tree.m * tree.N * tree.hop
    pts = tree.leaves % 1.0
    L = len(pts)
    iu, ju = np.triu_indices(L, 1)
    first = np.full(len(iu), -1, dtype=np.int64)
    peak = np.zeros(len(iu))
    cur = pts
    for i in range(n + 1):
        d = chart_metric("torus", cur[iu], cur[ju])
        newly = (first < 0) & (d >= gamma)
        first[newly] = i
        peak = np.maximum(peak, d)
        cur = map_coords(flow.base, cur, 1)
    bound = math.log(2.0) / (tree.N * tree.hop)
    ok = bool(np.all(first >= 0))
    offending = None
    if not ok:
        k = int(np.nonzero(first < 0)[0][0])
        offending = (int(iu[k]), int(ju[k]))
    latest = int(first.max()) if ok else -1
    return SeparationReport(ok, bound if ok else 0.0, len(iu), n, gamma, float(peak.min()),
                            latest, offending)


def tree_to_dict(tree: WitnessTree) -> dict:
    """JSON-ready description of the tree."""
    nodes = []
    for path in sorted(tree.nodes, key=lambda p: (len(p), p)):
        node = tree.nodes[path]
        entry = {
            "path": path,
            "samples": len(node.arc),
            "diameter": arc_diameter(node.arc),
            "anchor": node.arc.coords[node.anchor].tolist(),
        }
        if node.split is not None:
            entry["split_r"] = node.split.r
            entry["image_diameter"] = node.image_diameter
        if node.sibling_distance is not None:
            entry["sibling_distance"] = node.sibling_distance
        nodes.append(entry)
    return {
        "m": tree.m, "N": tree.N, "delta1": tree.delta1, "hop": tree.hop,
        "image_target": tree.target, "eps0": tree.eps0,
        "leaf_count": tree.leaf_count,
        "leaves": tree.leaves.tolist(),
        "checks": tree.checks,
        "nodes": nodes,
    }
