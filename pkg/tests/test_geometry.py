from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinvessel.errors import DomainError, GeometryValidationError, TipSingularityError
from thinvessel.geometry import (
    E_X,
    E_Y,
    E_Z,
    ArcCenterline,
    PolynomialCenterline,
    RadiusProfile,
    StraightCenterline,
    VesselGeometry,
    build_bishop_frame,
    geometry_from_dict,
    lateral_area,
    locate,
    radial_vectors,
    surface_jacobian,
    surface_normal,
    surface_point,
    validate_admissible,
    volume_jacobian,
)

HELIX = [[0.0, 0.0, 0.3, 0.1], [0.0, 0.0, 0.0, 0.2], [0.0, 1.0, 0.0, 0.0]]
ARC = VesselGeometry.arc(0.05, 1.0)


@pytest.fixture(scope="module")
def straight():
    return VesselGeometry.straight(0.1)


@pytest.fixture(scope="module")
def arc():
    return ARC


@pytest.fixture(scope="module")
def helix():
    return VesselGeometry.build(PolynomialCenterline(HELIX), RadiusProfile(), 0.02)


def test_straight_frame_is_constant():
    fr = build_bishop_frame(StraightCenterline(), 65, E_X)
    assert np.allclose(fr.e_t, E_Z, atol=0)
    assert np.allclose(fr.e1, E_X, atol=0)
    assert np.allclose(fr.e2, E_Y, atol=0)
    assert fr.kappa_star == 0.0
    assert np.all(fr.kappa1 == 0) and np.all(fr.kappa2 == 0)


def test_arc_frame_curvatures():
    R = 2.0
    fr = build_bishop_frame(ArcCenterline(R), 257, E_X)
    assert np.allclose(fr.kappa1, 1.0 / R, atol=1e-12)
    assert np.allclose(fr.kappa2, 0.0, atol=1e-12)
    assert fr.kappa_star == pytest.approx(1.0 / R, abs=1e-12)


def test_helix_frame_matches_fine_reference():
    cl = PolynomialCenterline(HELIX)
    coarse = build_bishop_frame(cl, 257)
    fine = build_bishop_frame(cl, 2561)
    E = np.stack([coarse.e_t, coarse.e1, coarse.e2], axis=1)
    assert np.max(np.abs(np.einsum("nij,nkj->nik", E, E) - np.eye(3))) < 1e-9
    ident = coarse.kappa1 ** 2 + coarse.kappa2 ** 2 - np.sum(cl.second_derivative(coarse.s) ** 2, axis=-1)
    assert np.max(np.abs(ident)) < 1e-8
    assert np.max(np.abs(coarse.e1 - fine.e1[::10])) < 1e-9


def test_frame_ode_residual(helix):
    fr = helix.frame
    h = fr.s[1] - fr.s[0]
    de1 = (fr.e1[2:] - fr.e1[:-2]) / (2 * h)
    rhs = -fr.kappa1[1:-1, None] * fr.e_t[1:-1]
    assert np.max(np.abs(de1 - rhs)) < 1e-5


def test_frame_rejects_bad_initial_normal():
    with pytest.raises(GeometryValidationError):
        build_bishop_frame(StraightCenterline(), 33, E_Z)
    with pytest.raises(GeometryValidationError):
        build_bishop_frame(StraightCenterline(), 33, 2 * E_X)


def test_polynomial_rejects_degenerate_and_bad_start():
    with pytest.raises(GeometryValidationError):
        PolynomialCenterline([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(GeometryValidationError):
        PolynomialCenterline([[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(GeometryValidationError):
        PolynomialCenterline([[0.0, 0.0], [0.0, 0.0], [0.1, 1.0]])


def test_polynomial_is_unit_speed_and_unit_length():
    cl = PolynomialCenterline(HELIX)
    s = np.linspace(0, 1, 401)
    assert np.max(np.abs(np.linalg.norm(cl.tangent(s), axis=-1) - 1)) < 1e-10
    X = cl.position(s)
    length = np.sum(np.linalg.norm(np.diff(X, axis=0), axis=-1))
    assert length == pytest.approx(1.0, abs=1e-5)


def test_surface_point_examples(straight, arc):
    p = surface_point(straight, 0.5, 0.0)
    assert np.allclose(p, [0.1 * math.sqrt(0.75), 0.0, 0.5], atol=1e-15)
    assert np.allclose(surface_point(arc, 1.0, 1.3), arc.centerline.position(1.0), atol=1e-15)
    s = np.linspace(0.0, 0.99, 50)
    th = np.linspace(0.0, 6.0, 50)
    d = np.linalg.norm(surface_point(arc, s, th) - arc.centerline.position(s), axis=-1)
    assert np.max(np.abs(d - arc.eps * arc.a(s))) < 1e-12
    with pytest.raises(DomainError):
        surface_point(straight, 1.2, 0.0)


def test_surface_normal_examples(straight):
    n = surface_normal(straight, 0.6, 0.0)
    assert np.allclose(n, np.array([1.0, 0.0, 0.075]) / math.sqrt(1.005625), atol=1e-15)
    with pytest.raises(TipSingularityError):
        surface_normal(straight, 1.0, 0.0)


def test_normal_equals_e_r_where_slope_vanishes(straight):
    # a'(0) = 0 for the spheroidal shape
    _, er, _ = radial_vectors(straight, 0.0, 0.7)
    assert np.array_equal(surface_normal(straight, 0.0, 0.7), er)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.995), st.floats(0.0, 2 * math.pi))
def test_normal_unit_and_perpendicular_to_theta_tangent(s, th):
    geom = ARC
    n = surface_normal(geom, s, th)
    assert abs(np.linalg.norm(n) - 1.0) < 1e-12
    _, _, eth = radial_vectors(geom, s, th)
    assert abs(float(np.dot(n, eth))) < 1e-12
    h = 1e-4
    tang = (surface_point(geom, s, th + h) - surface_point(geom, s, th - h)) / (2 * h)
    assert abs(float(np.dot(n, tang))) < 1e-8


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi))
def test_jacobian_lower_bound(s, th):
    geom = ARC
    J = float(surface_jacobian(geom, s, th))
    a = float(geom.a(s))
    assert J >= geom.eps * a * (1 - geom.eps * geom.kappa_star) - 1e-15


def test_jacobian_straight_form_and_tip(straight, arc):
    s = np.linspace(0, 0.99, 40)
    ea = straight.eps * straight.a(s)
    expect = ea * np.sqrt(1 + (straight.eps * straight.da(s)) ** 2)
    assert np.allclose(surface_jacobian(straight, s, 0.3), expect, rtol=1e-13)
    assert float(surface_jacobian(arc, 1.0, 0.0)) == pytest.approx(arc.eps ** 2 * 1.0)
    # the slope term a a' = -1 at the tip leaves eps^2; J_eps -> 0 with eps
    assert float(surface_jacobian(arc.with_eps(1e-4), 1.0, 0.0)) < 1e-7


def test_jacobian_close_to_eps_a(arc):
    S, T = np.meshgrid(np.linspace(0, 1, 101), np.linspace(0, 2 * np.pi, 33), indexing="ij")
    dev = np.max(np.abs(surface_jacobian(arc, S, T) - arc.eps * arc.a(S)))
    C = arc.kappa_star + 1.0  # a^2 kappa* plus |a a'| <= 1
    assert dev <= C * arc.eps ** 2


def test_lateral_area_matches_half_prolate_spheroid():
    eps = 0.05
    geom = VesselGeometry.straight(eps)
    e = math.sqrt(1 - eps ** 2)
    half = math.pi * eps ** 2 * (1 + math.asin(e) / (eps * e))
    assert lateral_area(geom, 1.0, 96, 16) == pytest.approx(half, rel=5e-3)


def test_volume_of_straight_vessel():
    eps = 0.1
    geom = VesselGeometry.straight(eps)
    xs, ws = np.polynomial.legendre.leggauss(24)
    s = 0.5 * (xs + 1)
    total = 0.0
    for si, wi in zip(s, 0.5 * ws):
        R = eps * float(geom.a(si))
        r = 0.5 * R * (xs + 1)
        inner = np.sum(0.5 * R * ws * volume_jacobian(geom, r, si, 0.0)) * 2 * np.pi
        total += wi * inner
    assert total == pytest.approx(math.pi * eps ** 2 * 2 / 3, rel=1e-8)
    assert np.all(volume_jacobian(geom, np.array([0.01, 0.02]), 0.3, 1.0) == [0.01, 0.02])


def test_curved_volume_close_to_straight(arc):
    xs, ws = np.polynomial.legendre.leggauss(16)
    th = 2 * np.pi * np.arange(16) / 16

    def volume(g):
        tot = 0.0
        for si, wi in zip(0.5 * (xs + 1), 0.5 * ws):
            R = g.eps * float(g.a(si))
            r = 0.5 * R * (xs + 1)
            J = volume_jacobian(g, r[:, None], si, th[None, :])
            tot += wi * np.sum(0.5 * R * ws[:, None] * J) * 2 * np.pi / 16
        return tot

    v_arc = volume(arc)
    v_str = volume(VesselGeometry.straight(arc.eps))
    assert abs(v_arc - v_str) <= arc.eps ** 3 * arc.kappa_star


def test_volume_jacobian_domain(arc):
    with pytest.raises(DomainError):
        volume_jacobian(arc, -0.1, 0.5, 0.0)
    with pytest.raises(DomainError):
        volume_jacobian(arc, 0.6, 0.5, 0.0)


def test_locate_round_trip(helix):
    rng = np.random.default_rng(3)
    s = rng.uniform(0.05, 0.95, 30)
    th = rng.uniform(0, 2 * np.pi, 30)
    r = rng.uniform(0.0, 0.03, 30)
    from thinvessel.geometry import point

    rr, tt, ss = locate(helix, point(helix, r, th, s))
    assert np.allclose(ss, s, atol=1e-10)
    assert np.allclose(rr, r, atol=1e-10)
    dth = np.angle(np.exp(1j * (tt - th)))
    assert np.all(np.abs(dth[r > 1e-6]) < 1e-7)


def test_admissible_reference_geometries(straight, arc, helix):
    for g in (straight, arc, helix):
        rep = validate_admissible(g)
        assert rep.passed, [c.name for c in rep.failures()]
    assert validate_admissible(straight).measured["kappa_star"] == 0.0


def test_radius_bump_fails_sup_norm():
    s = np.linspace(0, 1, 11)
    a = np.sqrt(1 - s ** 2)
    a[5] = 1.2
    geom = VesselGeometry.build(StraightCenterline(), RadiusProfile("tabulated", tuple(s), tuple(a)), 0.05)
    rep = validate_admissible(geom)
    assert not rep["radius_sup_is_one"].passed
    assert not rep.passed


def test_centerline_dipping_below_wall_fails_c_gamma():
    cl = PolynomialCenterline([[0.0, 0.0, 1.0, 0.0], [0.0] * 4, [0.0, 1.0, -4.2, 4.2]])
    geom = VesselGeometry.build(cl, RadiusProfile(), 0.01)
    rep = validate_admissible(geom)
    assert not rep["c_gamma_positive"].passed
    assert not rep["above_wall"].passed
    assert "wall-distance -" in rep["c_gamma_positive"].detail


def test_eps_above_curvature_bound_is_reported():
    geom = VesselGeometry.arc(0.2, 0.5)
    rep = validate_admissible(geom)
    assert not rep["eps_below_curvature_bound"].passed


def test_geometry_round_trips_through_dict(helix):
    g2 = geometry_from_dict(helix.to_dict())
    s = np.linspace(0, 1, 17)
    assert np.array_equal(g2.centerline.position(s), helix.centerline.position(s))
    assert g2.eps == helix.eps
