"""Compiled counting kernels.

The lattice kernels exploit translation invariance: for an affine torus map
x -> M x + b with integer M, two lattice points stay Bowen-close exactly when
their integer difference v does, so the neighbourhood of every lattice point
is the same set of offsets.
"""

from __future__ import annotations

import numba
import numpy as np

from .systems import _affine_pow, chain_distance_affine


def bowen_offsets(M: np.ndarray, side: int, steps: int, gamma: float, strict: bool) -> np.ndarray:
    """Nonzero integer offsets v with d(M^i v / side, 0) < gamma (or <=) for i = 0..steps."""
    R = int(np.ceil(gamma * side)) + 1
    a, b = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1), indexing="ij")
    v = np.stack([a.ravel(), b.ravel()], axis=1).astype(np.int64)
    w = v % side
    ok = np.ones(len(v), dtype=bool)
    Mi = np.asarray(M, dtype=np.int64)
    for _ in range(steps + 1):
        r = np.minimum(w, side - w) / side
        d = np.hypot(r[:, 0], r[:, 1])
        ok &= (d < gamma) if strict else (d <= gamma)
        w = (w @ Mi.T) % side
    v = v[ok]
    return v[np.any(v != 0, axis=1)]


@numba.njit(cache=True)
def greedy_offsets(side, offs):
    """Scan the side x side lattice row-major; keep every unmarked point and
    mark its offset neighbourhood. Returns the kept flat indices."""
    mark = np.zeros(side * side, np.bool_)
    kept = np.empty(side * side, np.int64)
    c = 0
    for a in range(side):
        for b in range(side):
            idx = a * side + b
            if mark[idx]:
                continue
            kept[c] = idx
            c += 1
            mark[idx] = True
            for k in range(offs.shape[0]):
                aa = (a + offs[k, 0]) % side
                bb = (b + offs[k, 1]) % side
                mark[aa * side + bb] = True
    return kept[:c]


@numba.njit(cache=True)
def greedy_matrix(close):
    """Greedy scan over a dense symmetric closeness matrix."""
    n = close.shape[0]
    mark = np.zeros(n, np.bool_)
    kept = np.empty(n, np.int64)
    c = 0
    for i in range(n):
        if mark[i]:
            continue
        kept[c] = i
        c += 1
        for j in range(n):
            if close[i, j]:
                mark[j] = True
    return kept[:c]


@numba.njit(cache=True)
def _position(px, py, tau, M, Minv, b):
    k = int(np.floor(tau + 1e-12))
    h = tau - k
    if h < 0.0:
        h = 0.0
    x, y = _affine_pow(M, Minv, b, px, py, k)
    return x, y, h


@numba.njit(cache=True)
def weak_close(px, py, ex, ey, J, dt, gamma, M, Minv, b, G, warp):
    """Is there a monotone alignment h (slopes 1/2, 1, 2 on the dt grid) with
    d(X^{h(s)}(p), X^s(e)) <= gamma at every grid time s in [0, J dt]?

    Dynamic programming over nodes (j, k) meaning h(j dt) = k dt.
    """
    K = 2 * J + 2
    reach = np.zeros((J + 1, K), np.bool_)
    reach[0, 0] = True
    lo = np.full(J + 1, K, np.int64)
    hi = np.full(J + 1, -1, np.int64)
    lo[0] = 0
    hi[0] = 0
    for j in range(J + 1):
        if lo[j] > hi[j]:
            continue
        if j == J:
            return True
        for k in range(lo[j], hi[j] + 1):
            if not reach[j, k]:
                continue
            for m in range(3 if warp else 1):
                dj = 1
                dk = 1
                if m == 1:
                    dj = 1
                    dk = 2
                elif m == 2:
                    dj = 2
                    dk = 1
                nj = j + dj
                nk = k + dk
                if nj > J or nk >= K or reach[nj, nk]:
                    continue
                ax, ay, ah = _position(px, py, nk * dt, M, Minv, b)
                bx, by, bh = _position(ex, ey, nj * dt, M, Minv, b)
                if chain_distance_affine(ax, ay, ah, bx, by, bh, M, Minv, b, G) <= gamma:
                    reach[nj, nk] = True
                    if nk < lo[nj]:
                        lo[nj] = nk
                    if nk > hi[nj]:
                        hi[nj] = nk
    return False


@numba.njit(cache=True)
def greedy_weak(side, coords, ball, bowen, J, dt, gamma, M, Minv, b, G, warp):
    """Scan-and-cover with the weak relation.

    `ball` holds time-0 offsets with d <= gamma (h(0) = 0 forces this), and
    `bowen` the Bowen-span offsets, which are covered without alignment search.
    """
    n = side * side
    covered = np.zeros(n, np.bool_)
    c = 0
    for a in range(side):
        for bb in range(side):
            idx = a * side + bb
            if covered[idx]:
                continue
            c += 1
            covered[idx] = True
            for k in range(bowen.shape[0]):
                covered[((a + bowen[k, 0]) % side) * side + (bb + bowen[k, 1]) % side] = True
            ex = coords[idx, 0]
            ey = coords[idx, 1]
            for k in range(ball.shape[0]):
                j = ((a + ball[k, 0]) % side) * side + (bb + ball[k, 1]) % side
                if covered[j]:
                    continue
                if weak_close(coords[j, 0], coords[j, 1], ex, ey, J, dt, gamma, M, Minv, b, G, warp):
                    covered[j] = True
    return c


@numba.njit(cache=True)
def reparam_diameter_affine(bx, by, taus, M, Minv, b, G, stop):
    """Max pairwise chain distance among the points X^{taus[i]}(b_i, 0).

    Returns as soon as the running maximum reaches `stop`.
    """
    n = bx.shape[0]
    xs = np.empty(n)
    ys = np.empty(n)
    hs = np.empty(n)
    for i in range(n):
        xs[i], ys[i], hs[i] = _position(bx[i], by[i], taus[i], M, Minv, b)
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = chain_distance_affine(xs[i], ys[i], hs[i], xs[j], ys[j], hs[j], M, Minv, b, G)
            if d > best:
                best = d
                if best >= stop:
                    return best
    return best
