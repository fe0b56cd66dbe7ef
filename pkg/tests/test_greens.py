from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from thinvessel.errors import DomainError, SingularityError
from thinvessel.geometry import VesselGeometry
from thinvessel.greens import (
    KernelContext,
    LineDensity,
    eval_green,
    reflect,
    ring_average_matrix,
    sn_apply,
    sn_surface_average,
    straight_line_potential,
)

FREE = KernelContext("free-space")
HALF = KernelContext("half-space")
EPS = 0.05
STRAIGHT = VesselGeometry.straight(EPS)
ARC = VesselGeometry.arc(EPS, 1.0)
L = math.sqrt(1.0 - EPS ** 2)


def line_exact(rho, z, image):
    v = straight_line_potential(rho, z, L)
    if image:
        v = v + straight_line_potential(rho, -z, L)
    return v / (4.0 * math.pi * L)


def ones(n=9):
    return LineDensity(np.linspace(0, 1, n), np.ones(n))


def test_eval_green_hand_value():
    x = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 0.0, 2.0])
    assert float(eval_green(HALF, x, y)) == pytest.approx(1.0 / (3.0 * math.pi), rel=1e-15)
    assert float(eval_green(FREE, x, y)) == pytest.approx(1.0 / (4.0 * math.pi), rel=1e-15)


def test_eval_green_coincident_points_raise():
    with pytest.raises(SingularityError):
        eval_green(HALF, np.array([0.1, 0.2, 0.3]), np.array([0.1, 0.2, 0.3]))


def test_green_symmetry_many_pairs():
    rng = np.random.default_rng(1)
    x = rng.uniform([-2, -2, 0], [2, 2, 2], (1000, 3))
    y = rng.uniform([-2, -2, 0], [2, 2, 2], (1000, 3))
    assert np.max(np.abs(eval_green(HALF, x, y) - eval_green(HALF, y, x))) < 1e-14


def test_green_neumann_wall():
    rng = np.random.default_rng(2)
    y = rng.uniform([-1, -1, 0.1], [1, 1, 2], (50, 3))
    x = rng.uniform([-1, -1, 0], [1, 1, 0], (50, 3))
    h = 1e-5
    e = np.array([0, 0, h])
    dz = (eval_green(HALF, x + e, y) - eval_green(HALF, x - e, y)) / (2 * h)
    assert np.max(np.abs(dz)) < 1e-8
    assert np.allclose(reflect(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, -3.0])


def test_zero_density_gives_zero():
    f = LineDensity(np.linspace(0, 1, 5), np.zeros(5))
    assert float(sn_apply(HALF, STRAIGHT, f, np.array([0.3, 0.0, 0.5]))) == 0.0
    assert sn_surface_average(HALF, STRAIGHT, f, 0.4, 16) == 0.0


@pytest.mark.parametrize("rho,z", [(0.05, 0.5), (0.5, 1.2)])
@pytest.mark.parametrize("ctx", [FREE, HALF], ids=["free", "half"])
def test_straight_line_oracle(ctx, rho, z):
    got = float(sn_apply(ctx, STRAIGHT, ones(), np.array([rho, 0.0, z])))
    assert got == pytest.approx(line_exact(rho, z, ctx.image), rel=1e-10)


def test_oracle_twenty_probes_and_on_surface():
    rng = np.random.default_rng(5)
    rho = rng.uniform(3 * EPS, 0.8, 20)
    z = rng.uniform(0.0, 1.5, 20)
    ph = rng.uniform(0, 2 * np.pi, 20)
    x = np.stack([rho * np.cos(ph), rho * np.sin(ph), z], axis=-1)
    for ctx in (FREE, HALF):
        got = sn_apply(ctx, STRAIGHT, ones(), x)
        assert np.max(np.abs(got / line_exact(rho, z, ctx.image) - 1)) < 1e-10
        s = np.linspace(0.05, 0.95, 19)
        r = EPS * STRAIGHT.a(s)
        xs = np.stack([r, 0 * r, s], axis=-1)
        got = sn_apply(ctx, STRAIGHT, ones(), xs)
        assert np.max(np.abs(got / line_exact(r, s, ctx.image) - 1)) < 1e-6


def test_surface_average_axisymmetric_oracle():
    for s in (0.1, 0.5, 0.9):
        r = EPS * float(STRAIGHT.a(s))
        got = sn_surface_average(HALF, STRAIGHT, ones(), s, 16)
        assert got == pytest.approx(2 * math.pi * line_exact(r, s, True), rel=1e-9)


def test_surface_average_theta_self_convergence_on_arc():
    f = LineDensity(np.linspace(0, 1, 33), np.cos(np.linspace(0, 1, 33)) + 0.5)
    for s in (0.2, 0.6):
        a32 = sn_surface_average(HALF, ARC, f, s, 32)
        a64 = sn_surface_average(HALF, ARC, f, s, 64)
        assert abs(a32 - a64) < 1e-10


def test_interior_target_raises():
    with pytest.raises(DomainError):
        sn_apply(HALF, STRAIGHT, ones(), np.array([0.001, 0.0, 0.5]))
    with pytest.raises(DomainError):
        sn_apply(HALF, STRAIGHT, ones(), np.array([0.3, 0.0, -0.1]))


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31))
def test_linearity(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, 11)
    f = LineDensity(t, rng.normal(size=11))
    g = LineDensity(t, rng.normal(size=11))
    h = LineDensity(t, alpha * f.values + beta * g.values)
    from thinvessel.geometry import point

    near = point(ARC, 1.05 * EPS * ARC.a(0.3), 0.4, 0.3)
    x = np.array([[0.2, 0.1, 0.4], near, [0.0, 0.7, 1.1]])
    lhs = sn_apply(HALF, ARC, h, x)
    rhs = alpha * sn_apply(HALF, ARC, f, x) + beta * sn_apply(HALF, ARC, g, x)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_positivity(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, 9)
    f = LineDensity(t, rng.uniform(0, 1, 9))
    x = rng.uniform([-0.6, -0.6, 0.0], [0.6, 0.6, 1.5], (20, 3))
    from thinvessel.geometry import is_interior

    x = x[~is_interior(ARC, x, rel_tol=-0.01)]
    assert np.all(sn_apply(HALF, ARC, f, x) >= 0)


def test_harmonicity():
    t = np.linspace(0, 1, 17)
    f = LineDensity(t, 1 + np.sin(3 * t))
    h = 1e-3
    # the stencil's truncation error scales like h^2 / d^4 at distance d from
    # the line, so probes sit at least 0.25 away from the centerline
    pts = np.array([[0.0, 0.3, 0.3], [0.0, -0.3, 0.8], [0.4, 0.2, 0.2], [0.6, 0.1, 1.3]])
    from thinvessel.geometry import locate

    r, _, _ = locate(ARC, pts)
    assert np.all(r >= 0.25)
    lap = np.zeros(len(pts))
    c = sn_apply(HALF, ARC, f, pts)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        lap += sn_apply(HALF, ARC, f, pts + e) + sn_apply(HALF, ARC, f, pts - e) - 2 * c
    lap /= h * h
    assert np.max(np.abs(lap)) < 1e-4 * np.max(np.abs(f.values))


def test_quadrature_second_order_in_density_grid():
    x = np.array([0.3, 0.0, 0.6])

    def exact():
        val, _ = quad(lambda t: t * t / math.sqrt(0.3 ** 2 + (0.6 - L * t) ** 2), 0, 1,
                      epsabs=1e-14, epsrel=1e-13)
        return val / (4 * math.pi)

    ref = exact()
    errs = []
    for n in (9, 17, 33):
        t = np.linspace(0, 1, n)
        errs.append(abs(float(sn_apply(FREE, STRAIGHT, LineDensity(t, t * t), x)) - ref))
    assert errs[0] / errs[1] >= 4.0
    assert errs[1] / errs[2] >= 4.0


def test_ring_matrix_consistent_with_surface_average():
    t = np.linspace(0, 1, 21)
    vals = np.exp(-t)
    M = ring_average_matrix(HALF, ARC, t, [0.3, 0.7], 24)
    for i, s in enumerate((0.3, 0.7)):
        assert M[i] @ vals == pytest.approx(sn_surface_average(HALF, ARC, LineDensity(t, vals), s, 24),
                                            rel=1e-12)
