import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergoflow.spaces import TorusPoint, distance, segment_arc, singleton_arc
from ergoflow.systems import CAT_LAMBDA, UnsupportedSystemError, apply_map, make_system, suspension_flow
from ergoflow.sections import (
    SectionDomainError,
    SectionValidationError,
    ShadowPreconditionError,
    SuspensionPoint,
    build_pair,
    build_triple,
    first_return,
    phi_orbit,
    project_P_rho,
    return_continuum,
    shadow_sequence,
    stable_membership,
    tile_index,
    validation_report,
    varphi_return,
)

CAT = make_system("cat-suspension")
PAIR = build_pair(CAT, 0.2)
TRIPLE = build_triple(CAT, 0.3)
UNSTABLE = np.array([1.0, CAT_LAMBDA - 2.0]) / math.hypot(1.0, CAT_LAMBDA - 2.0)
STABLE = np.array([1.0, 1.0 / CAT_LAMBDA - 2.0]) / math.hypot(1.0, 1.0 / CAT_LAMBDA - 2.0)


def centre(pair, a=3, b=5):
    return np.array([(a + 0.5) * pair.cell, (b + 0.5) * pair.cell])


def centred_segment(pair, direction, length, n=33, a=3, b=5):
    c = centre(pair, a, b)
    A = segment_arc(c - direction * length / 2, c + direction * length / 2, n)
    return A, n // 2


def test_pair_inequalities():
    for delta in (0.2, 0.3):
        p = build_pair(CAT, delta)
        assert 5 * p.rho < p.eps and 2 * p.rho < p.theta
        assert p.patch_diameter("S") <= delta + 1e-12
        assert p.patch_diameter("T") < p.patch_diameter("S")
        assert all(p.covering.values())


def test_theta_is_one_by_return_oracle():
    rng = np.random.default_rng(0)
    ts = np.arange(1, 301) / 100
    for x in rng.random((10, 2)):
        p = SuspensionPoint(TorusPoint(*x), 0.0)
        hits = [t for t in ts if suspension_flow(CAT.base, p, t).height < 1e-9]
        assert hits[0] == pytest.approx(1.0)
    assert PAIR.theta == 1.0


def test_pair_rejects_zero_delta():
    with pytest.raises(SectionValidationError):
        build_pair(CAT, 0.0)


def test_pair_rejects_fixed_point_flow():
    with pytest.raises(UnsupportedSystemError):
        build_pair(make_system("interval-logistic"), 0.2)


def test_validation_report_fields():
    rep = validation_report(PAIR)
    assert set(rep["constants"]) == {"eps", "delta", "theta", "rho", "eps0"}
    assert rep["lattice_resolution"] == PAIR.resolution
    assert rep["patches"] == PAIR.g ** 2


def test_first_return_is_base_map():
    p = TorusPoint(0.3, 0.41)
    y, t = first_return(PAIR, CAT, SuspensionPoint(p, 0.0))
    assert t == 1.0
    assert distance(y.base, apply_map(CAT.base, p, 1)) < 1e-12


def test_first_return_twice_is_two_crossings():
    x = SuspensionPoint(TorusPoint(0.71, 0.13), 0.0)
    y = first_return(PAIR, CAT, first_return(PAIR, CAT, x)[0])[0]
    ref = suspension_flow(CAT.base, x, 2.0)
    assert CAT.distance(y, ref) < 1e-9


def test_first_return_domain():
    with pytest.raises(SectionDomainError):
        first_return(PAIR, CAT, SuspensionPoint(TorusPoint(0.3, 0.4), 0.5))


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_first_return_time_in_range(x, y):
    _, t = first_return(PAIR, CAT, SuspensionPoint(TorusPoint(x, y), 0.0))
    assert PAIR.theta <= t <= PAIR.eps


def test_projection_idempotent():
    s = SuspensionPoint(TorusPoint(*centre(PAIR)), 0.0)
    i = int(tile_index(PAIR, centre(PAIR)))
    q, t = project_P_rho(PAIR, CAT, s, i)
    assert q == s and t == 0.0


def test_projection_recovers_crossing():
    s = SuspensionPoint(TorusPoint(*centre(PAIR)), 0.0)
    i = int(tile_index(PAIR, centre(PAIR)))
    q, t = project_P_rho(PAIR, CAT, suspension_flow(CAT.base, s, PAIR.rho / 2), i)
    assert CAT.distance(q, s) < 1e-12
    assert t == pytest.approx(-PAIR.rho / 2)


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(-0.099, 0.099))
def test_projection_flow_time(x, y, dt):
    s = SuspensionPoint(TorusPoint(x, y), 0.0)
    i = int(tile_index(PAIR, np.array([x, y])))
    moved = suspension_flow(CAT.base, s, dt)
    q, t = project_P_rho(PAIR, CAT, moved, i)
    assert abs(t) < PAIR.rho
    # flowing the result by t returns the input
    assert CAT.distance(suspension_flow(CAT.base, q, -t), moved) < 1e-9


def test_projection_domain():
    with pytest.raises(SectionDomainError):
        project_P_rho(PAIR, CAT, SuspensionPoint(TorusPoint(0.3, 0.4), 0.5), 0)


def test_shadow_of_itself():
    x = SuspensionPoint(TorusPoint(*centre(PAIR)), 0.0)
    orb = shadow_sequence(PAIR, CAT, x, x, 6)
    assert orb.status == "complete"
    ref = phi_orbit(PAIR, CAT, x, 6)
    for (j, y, _), r in zip(orb.entries, ref):
        assert distance(y.base, r.base) < 1e-9


def test_shadow_stable_contracts():
    eta = 0.5 * PAIR.eps0
    c = centre(PAIR)
    x = SuspensionPoint(TorusPoint(*c), 0.0)
    y = SuspensionPoint(TorusPoint(*(c + STABLE * eta / 2)), 0.0)
    orb = shadow_sequence(PAIR, CAT, x, y, 6)
    assert orb.status == "complete"
    xs = phi_orbit(PAIR, CAT, x, 6)
    for (j, yj, _), xj in zip(orb.entries, xs):
        assert distance(xj.base, yj.base) == pytest.approx(eta / 2 * CAT_LAMBDA ** -j, rel=1e-6)


def test_shadow_unstable_diverges():
    c = centre(PAIR)
    x = SuspensionPoint(TorusPoint(*c), 0.0)
    y = SuspensionPoint(TorusPoint(*(c + UNSTABLE * PAIR.eps0 / 2)), 0.0)
    orb = shadow_sequence(PAIR, CAT, x, y, 6)
    expected = next(i for i in range(1, 10) if PAIR.eps0 / 2 * CAT_LAMBDA ** i >= PAIR.eps0)
    assert orb.status == "diverged" and orb.diverged_at == expected


def test_shadow_precondition():
    x = SuspensionPoint(TorusPoint(*centre(PAIR)), 0.0)
    y = SuspensionPoint(TorusPoint(0.9, 0.9), 0.0)
    with pytest.raises(ShadowPreconditionError):
        shadow_sequence(PAIR, CAT, x, y, 3)


def test_return_of_singleton():
    c = centre(PAIR)
    img = return_continuum(PAIR, CAT, singleton_arc(c), 0, 3)
    ref = apply_map(CAT.base, TorusPoint(*c), 3)
    assert len(img.arc) == 1
    assert distance(img.arc.samples[0], ref) < 1e-9


def test_return_unstable_stretch():
    L = 0.005
    A, a = centred_segment(PAIR, UNSTABLE, L)
    img = return_continuum(PAIR, CAT, A, a, 1)
    assert img.ok
    assert img.diameters[-1] == pytest.approx(CAT_LAMBDA * L, rel=1e-6)


def test_return_stable_stretch_backward():
    L = 0.005
    A, a = centred_segment(PAIR, STABLE, L)
    img = return_continuum(PAIR, CAT, A, a, -1)
    assert img.ok
    assert img.diameters[-1] == pytest.approx(CAT_LAMBDA * L, rel=1e-6)


def test_return_overflow_is_data():
    A, a = centred_segment(PAIR, UNSTABLE, PAIR.eps0 / 3)
    img = return_continuum(PAIR, CAT, A, a, 5)
    assert not img.ok and img.overflow_step == 2


def test_membership_singleton_both():
    m = stable_membership(PAIR, CAT, singleton_arc(centre(PAIR)), 0, 0.5 * PAIR.eps0, 8)
    assert m.verdict == "both"


def test_membership_unstable():
    eta = 0.5 * PAIR.eps0
    A, a = centred_segment(PAIR, UNSTABLE, eta / 2)
    m = stable_membership(PAIR, CAT, A, a, eta, 8)
    assert m.verdict == "in-W^u"
    for n, d in enumerate(m.backward):
        assert d == pytest.approx(eta / 2 * CAT_LAMBDA ** -n, rel=0.05)


def test_membership_stable_trace_vanishes():
    eta = 0.5 * PAIR.eps0
    A, a = centred_segment(PAIR, STABLE, eta / 2)
    m = stable_membership(PAIR, CAT, A, a, eta, 8)
    assert m.verdict == "in-W^s"
    assert m.forward[-1] < 0.1 * eta


def test_membership_follows_late_growth():
    eta = 0.5 * PAIR.eps0
    # stable segment plus an unstable part that passes eta only after step 8
    v = STABLE * eta / 2 + UNSTABLE * eta * CAT_LAMBDA ** -9
    c = centre(PAIR)
    A = segment_arc(c - v / 2, c + v / 2, 33)
    m = stable_membership(PAIR, CAT, A, 16, eta, 8)
    assert max(m.forward[:9]) < eta
    assert m.verdict == "neither"
    assert len(m.forward) > 9


def test_membership_rotation_keeps_flat_traces():
    rot = make_system("rotation-suspension")
    pair = build_pair(rot, 0.2)
    eta = 0.5 * pair.eps0
    A, a = centred_segment(pair, np.array([1.0, 0.0]), eta / 2)
    m = stable_membership(pair, rot, A, a, eta, 8)
    assert m.verdict == "both"
    assert len(m.forward) == len(m.backward) == 9


def test_membership_eta_bound():
    from ergoflow.spaces import ParameterError
    with pytest.raises(ParameterError):
        stable_membership(PAIR, CAT, singleton_arc(centre(PAIR)), 0, PAIR.eps0, 4)


directions = st.floats(0, math.pi)
lengths = st.floats(1e-7, 0.5 * 0.5 * 0.03125)


@given(directions, lengths)
def test_both_means_tiny(theta, L):
    eta, n_max = 0.5 * PAIR.eps0, 8
    v = np.array([math.cos(theta), math.sin(theta)])
    A, a = centred_segment(PAIR, v, L, n=9)
    m = stable_membership(PAIR, CAT, A, a, eta, n_max)
    if m.verdict == "both":
        # orthogonal eigen-components both stay below eta for n_max steps
        assert L <= math.sqrt(2) * eta * CAT_LAMBDA ** -n_max * 1.01


@given(directions, lengths)
def test_stable_verdict_forces_decay(theta, L):
    eta, N = 0.5 * PAIR.eps0, 4
    v = np.array([math.cos(theta), math.sin(theta)])
    A, a = centred_segment(PAIR, v, L, n=9)
    m = stable_membership(PAIR, CAT, A, a, eta, 2 * N)
    if m.verdict in ("in-W^s", "both"):
        assert m.forward[N] < 0.1 * eta


def test_triple_nesting():
    tri = TRIPLE
    p1, p2, p3 = tri.pairs
    assert p1.t_margin == p2.t_margin == 0.0
    assert p3.t_margin == p2.s_margin
    assert p3.s_margin == p1.s_margin
    assert p2.s_margin < p1.s_margin
    assert tri.theta_prime > 0


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_varphi_hops(x, y):
    tri = TRIPLE
    p = SuspensionPoint(TorusPoint(x, y), 0.0)
    _, t, hops = varphi_return(tri, CAT, p)
    assert t >= tri.pairs[2].theta
    assert hops == 1
    assert hops <= tri.hop_bound


def test_varphi_domain():
    with pytest.raises(SectionDomainError):
        varphi_return(TRIPLE, CAT, SuspensionPoint(TorusPoint(0.1, 0.1), 0.5))
