from __future__ import annotations

import math

import numpy as np
import pytest

from thinvessel.bem3d1d import (
    assemble_bem,
    build_boundary_mesh,
    compare_to_1d,
    default_probes,
    normal_derivative_operator,
    reciprocity_asymmetry,
    solve_bem,
    sphere_mesh,
)
from thinvessel.errors import ConfigError
from thinvessel.geometry import VesselGeometry, lateral_area
from thinvessel.greens import KernelContext
from thinvessel.solver1d import Mesh1D, Params, assemble_system, ha_norm_values, solve_pressure

EPS = 0.05
STRAIGHT = VesselGeometry.straight(EPS)
N_S, N_T = 16, 8


@pytest.fixture(scope="module")
def mesh():
    return build_boundary_mesh(STRAIGHT, N_S, N_T, EPS ** 2)


@pytest.fixture(scope="module")
def system(mesh):
    return assemble_bem(STRAIGHT, mesh, Params())


@pytest.fixture(scope="module")
def bem(system):
    return solve_bem(system)


@pytest.fixture(scope="module")
def sphere_ops():
    return sphere_mesh(16, 16), {s: normal_derivative_operator(sphere_mesh(16, 16), "free-space", s) for s in (-1, 1)}


def test_default_mesh_size_and_area():
    m = build_boundary_mesh(STRAIGHT, 40, 16)
    assert m.n_panels == 640
    assert np.all(m.areas > 0)
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1.0, atol=1e-14)
    e = math.sqrt(1 - EPS ** 2)
    half = math.pi * EPS ** 2 * (1 + math.asin(e) / (EPS * e))
    assert m.areas.sum() == pytest.approx(half, rel=0.01)
    assert m.areas.sum() == pytest.approx(lateral_area(STRAIGHT, m.u_edges[-1], 96, 16), rel=0.01)


def test_tip_panels_shrink(mesh):
    ring = mesh.areas.reshape(N_S, N_T).sum(axis=1)
    assert ring[-1] < 0.05 * ring.max()
    finer = build_boundary_mesh(STRAIGHT, 64, 8, 1e-6)
    assert finer.areas.reshape(64, 8).sum(axis=1)[-1] < ring[-1]


def test_refinement_halves_diameter():
    d1 = build_boundary_mesh(STRAIGHT, 16, 8).diameters().max()
    d2 = build_boundary_mesh(STRAIGHT, 32, 16).diameters().max()
    assert d1 / d2 == pytest.approx(2.0, rel=0.1)


def test_mesh_errors():
    with pytest.raises(ConfigError):
        build_boundary_mesh(STRAIGHT, 16, 4)
    with pytest.raises(ConfigError):
        build_boundary_mesh(STRAIGHT, 16, 8, mesh1d=Mesh1D.graded(12, EPS ** 2))


def test_stations_coincide_with_1d_mesh(mesh):
    assert np.array_equal(mesh.u_edges, Mesh1D.graded(N_S, EPS ** 2).nodes)


def test_row_count(system, mesh):
    assert system.matrix.shape == (mesh.n_panels + N_S + 2,) * 2


def test_sphere_jump_oracle(sphere_ops):
    m, ops = sphere_ops
    got = ops[-1][1] @ np.ones(m.n_panels)
    assert np.max(np.abs(got + 1.0)) < 0.02
    flipped = ops[1][1] @ np.ones(m.n_panels)
    assert abs(np.mean(flipped)) < 0.02


def test_sphere_single_layer_is_monopole(sphere_ops):
    m, _ = sphere_ops
    from thinvessel.bem3d1d import layer_matrices

    x = np.array([[0.0, 0.0, 2.0], [3.0, 1.0, -1.0]])
    V, _ = layer_matrices(m, x, None)
    # unit density on the unit sphere has total charge 4 pi
    assert np.allclose(V @ np.ones(m.n_panels), 1.0 / np.linalg.norm(x, axis=1), rtol=2e-3)


def test_reciprocity(mesh):
    assert reciprocity_asymmetry(mesh) < 0.01


def test_residual_and_conservation(bem):
    assert bem.residual < 1e-8
    assert bem.conservation_error() < 1e-4


def test_kappa_zero_exact(mesh):
    b0 = solve_bem(assemble_bem(STRAIGHT, mesh, Params(kappa=0.0)))
    assert np.max(np.abs(b0.sigma)) < 1e-12
    assert np.max(np.abs(b0.p - 1.0)) < 1e-12
    s0 = solve_pressure(assemble_system(STRAIGHT, KernelContext(), mesh.mesh1d, Params(kappa=0.0)))
    err = compare_to_1d(b0, s0)
    assert err["ha_error"] < 1e-12 and err["surface_l2_error"] < 1e-12 and err["gradient_probe_rms"] < 1e-12


def test_linear_in_p0(system, bem, mesh):
    b2 = solve_bem(assemble_bem(STRAIGHT, mesh, Params(p0=-3.0)))
    assert np.max(np.abs(b2.p + 3.0 * bem.p)) <= 1e-12 * 3.0
    assert np.max(np.abs(b2.sigma + 3.0 * bem.sigma)) <= 1e-12 * 3.0 * np.max(np.abs(bem.sigma))


def test_wall_neumann_and_decay(bem):
    rng = np.random.default_rng(4)
    rho = rng.uniform(3 * EPS, 1.0, 50)
    ph = rng.uniform(0, 2 * np.pi, 50)
    x = np.stack([rho * np.cos(ph), rho * np.sin(ph), np.zeros(50)], axis=-1)
    h = 1e-5
    e = np.array([0.0, 0.0, h])
    dz = (bem.q(x + e) - bem.q(x - e)) / (2 * h)
    qmax = np.max(np.abs(bem.wall_q()))
    assert np.max(np.abs(dz)) < 1e-6 * qmax
    far = np.array([[0.0, 0.0, 1e3], [2e3, 0.0, 5.0]])
    assert np.all(np.abs(bem.q(far)) < 1e-2 * qmax)


def test_energy_ratios_bounded(bem, mesh):
    p0 = bem.system.params.p0
    pn = ha_norm_values(mesh.mesh1d.nodes, bem.pressure_at(mesh.mesh1d.nodes), a=STRAIGHT.a) / abs(p0)
    gap = bem.p[1 + mesh.iu] - bem.wall_q()
    trace = math.sqrt(np.sum(gap ** 2 * mesh.areas) / mesh.areas.sum()) / abs(p0)
    assert pn < 10 and trace < 10


def test_compare_symmetric_in_probe_order(bem, mesh):
    sol = solve_pressure(assemble_system(STRAIGHT, KernelContext(), mesh.mesh1d, Params()))
    probes = default_probes(STRAIGHT)
    a = compare_to_1d(bem, sol, probes)
    b = compare_to_1d(bem, sol, probes[::-1])
    assert a["ha_error"] == b["ha_error"] and a["surface_l2_error"] == b["surface_l2_error"]
    assert b["gradient_probe_rms"] == pytest.approx(a["gradient_probe_rms"], rel=1e-12)
    assert a["gradient_probe_is_proxy"] is True


def test_compare_rejects_mismatched_meshes(bem):
    other = solve_pressure(assemble_system(STRAIGHT, KernelContext(), Mesh1D.graded(N_S + 2, EPS ** 2), Params()))
    with pytest.raises(ConfigError):
        compare_to_1d(bem, other)


def test_unknown_variant_rejected(mesh):
    with pytest.raises(ConfigError):
        assemble_bem(STRAIGHT, mesh, Params(), variant="periodic")


def test_csv_outputs(bem, tmp_path):
    bem.pressure_to_csv(tmp_path / "p.csv")
    bem.panels_to_csv(tmp_path / "panels.csv")
    lines = (tmp_path / "panels.csv").read_text().splitlines()
    assert lines[0] == "s,theta,sigma,q,dqdn" and len(lines) == N_S * N_T + 1
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "s,p"
