import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergoflow.spaces import (
    Arc,
    IntervalPoint,
    KindMismatchError,
    ParameterError,
    PrecisionError,
    SymbolWord,
    TorusPoint,
    arc_diameter,
    distance,
    refine_arc,
    segment_arc,
    singleton_arc,
    sub_arc,
)

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)
coord = st.floats(-3.0, 3.0, allow_nan=False)
torus_points = st.builds(TorusPoint, coord, coord)
interval_points = st.builds(IntervalPoint, st.floats(0.0, 1.0))
words = st.lists(st.integers(0, 1), min_size=9, max_size=9).map(lambda w: SymbolWord(tuple(w)))


def test_torus_point_reduced_mod_one():
    p = TorusPoint(1.25, -0.25)
    assert p.x == pytest.approx(0.25)
    assert p.y == pytest.approx(0.75)


def test_interval_point_range():
    with pytest.raises(ParameterError):
        IntervalPoint(1.5)


def test_word_reads_within_radius_only():
    w = SymbolWord((0, 1, 0))
    assert w.symbol(1) == 0
    with pytest.raises(PrecisionError):
        w.symbol(2)


def test_torus_wraparound_distance():
    assert distance(TorusPoint(0.9, 0), TorusPoint(0.1, 0)) == pytest.approx(0.2)


def test_identity_distance():
    p = TorusPoint(0.3, 0.7)
    assert distance(p, p) == 0.0


def test_word_distance_first_difference_at_two():
    zero = SymbolWord((0,) * 9)
    for i in (2, -2):
        w = [0] * 9
        w[4 + i] = 1
        assert distance(zero, SymbolWord(tuple(w))) == pytest.approx(0.25)


def test_mixed_kinds_rejected():
    with pytest.raises(KindMismatchError):
        distance(TorusPoint(0, 0), IntervalPoint(0.5))


def test_torus_diameter_below_one():
    grid = np.linspace(0, 1, 20, endpoint=False)
    best = max(distance(TorusPoint(0, 0), TorusPoint(x, y)) for x in grid for y in grid)
    assert best == pytest.approx(math.sqrt(2) / 2)
    assert best < 1


def test_segment_diameter_straight():
    assert arc_diameter(segment_arc((0, 0), (0.3, 0), 7)) == pytest.approx(0.3)


def test_singleton_diameter():
    assert arc_diameter(singleton_arc((0.2, 0.4))) == 0.0


def test_long_segment_diameter_wraps():
    A = segment_arc((0, 0), (0.6, 0), 61)
    # brute force over sample pairs with the wraparound metric
    pts = A.samples
    oracle = max(distance(p, q) for p, q in itertools.combinations(pts, 2))
    assert arc_diameter(A) == pytest.approx(oracle)
    assert oracle == pytest.approx(0.5)


def test_refine_short_segment():
    A = refine_arc(segment_arc((0, 0), (0.3, 0)), 0.1)
    assert len(A) >= 4
    assert A.mesh <= 0.1 + 1e-12


def test_refine_never_coarser():
    A = segment_arc((0, 0), (0.1, 0), 50)
    assert len(refine_arc(A, 0.5)) >= len(A)


def test_refine_scan_mesh():
    A = refine_arc(segment_arc((0.1, 0.2), (0.6, 0.2)), 0.05)
    gaps = [distance(p, q) for p, q in zip(A.samples, A.samples[1:])]
    assert max(gaps) <= 0.05 + 1e-12
    np.testing.assert_allclose(A.coords[0], [0.1, 0.2])
    np.testing.assert_allclose(A.coords[-1], [0.6, 0.2])


def test_refine_rejects_nonpositive():
    with pytest.raises(ParameterError):
        refine_arc(segment_arc((0, 0), (0.3, 0)), 0.0)


def test_sub_arc_extremes():
    A = segment_arc((0, 0), (0.5, 0), 11)
    S = sub_arc(A, 0.0, 3)
    assert len(S) == 1
    np.testing.assert_allclose(S.coords[0], A.coords[3])
    assert sub_arc(A, 1.0, 3) is A


def test_sub_arc_half_from_first_sample():
    A = segment_arc((0, 0), (0.5, 0), 11)
    S = sub_arc(A, 0.5, 0)
    # arclength accumulation: fraction 0.5 ends exactly at sample 5
    cum = np.concatenate([[0], np.cumsum(np.full(10, 0.05))]) / 0.5
    expected = A.coords[cum <= 0.5 + 1e-12]
    assert len(S) == len(expected) == 6
    np.testing.assert_allclose(S.coords, expected, atol=1e-12)


def test_sub_arc_bad_anchor():
    with pytest.raises(IndexError):
        sub_arc(segment_arc((0, 0), (0.5, 0), 11), 0.5, 11)


def test_arc_needs_a_sample():
    with pytest.raises(ParameterError):
        Arc("torus", np.zeros((0, 2)))


@given(st.one_of(
    st.tuples(torus_points, torus_points, torus_points),
    st.tuples(interval_points, interval_points, interval_points),
    st.tuples(words, words, words),
))
def test_metric_axioms(triple):
    p, q, r = triple
    assert distance(p, q) == pytest.approx(distance(q, p))
    assert distance(p, p) == 0.0
    assert distance(p, r) <= distance(p, q) + distance(q, r) + 1e-12


# inside a chart box of side < 1/2 the torus metric is Euclidean, so sampled
# diameters are attained at polyline vertices
box = st.floats(0.0, 0.45, allow_nan=False)
segments = st.tuples(box, box, box, box, st.integers(2, 12)).map(
    lambda t: segment_arc(t[:2], t[2:4], t[4]))


@given(segments, st.floats(0.01, 0.5))
def test_refine_keeps_diameter_and_mesh(A, target):
    B = refine_arc(A, target)
    assert arc_diameter(B) <= arc_diameter(A) + 1e-9
    assert B.mesh <= A.mesh + 1e-9
    assert B.mesh <= target + 1e-9


@given(segments, st.floats(0, 1), st.floats(0, 1), st.data())
def test_sub_arc_nesting_and_monotone_diameter(A, r, s, data):
    r, s = min(r, s), max(r, s)
    i = data.draw(st.integers(0, len(A) - 1))
    small, big = sub_arc(A, r, i), sub_arc(A, s, i)
    # every sample of the smaller piece lies on the larger polyline
    for c in small.coords:
        seg = big.coords
        if len(seg) == 1:
            assert np.allclose(c, seg[0])
            continue
        a, b = seg[:-1], seg[1:]
        ab = b - a
        denom = np.maximum((ab * ab).sum(1), 1e-300)
        t = np.clip(((c - a) * ab).sum(1) / denom, 0, 1)
        assert np.min(np.linalg.norm(a + t[:, None] * ab - c, axis=1)) < 1e-9
    assert arc_diameter(small) <= arc_diameter(big) + 1e-9
