"""Fields reconstructed from a 1D solution: exterior pressure, interior
velocity ansatz with its tip cutoff, and the diagnostics built on them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import CutoffZoneError, DomainError
from .geometry import (VesselGeometry, is_interior, kappa_hat, locate, point, radial_vectors,
                       surface_jacobian, surface_normal)
from .greens import KernelContext, ring_weights, sn_weights
from .solver1d import Solution1D


def q_prefactor(sol: Solution1D) -> float:
    return math.pi / (8.0 * sol.params.zeta * sol.params.mu)


def exterior_pressure(ctx: KernelContext, geom: VesselGeometry, sol: Solution1D, x):
    """q^SB = pi / (8 zeta mu) S_N[F] at exterior points."""
    x = np.asarray(x, dtype=float)
    dens = sol.density()
    W = sn_weights(ctx, geom, dens.nodes, x.reshape(-1, 3))
    q = q_prefactor(sol) * (W @ dens.values)
    return q.reshape(x.shape[:-1]) if x.ndim > 1 else float(q[0])


def surface_pressure(ctx: KernelContext, geom: VesselGeometry, sol: Solution1D, stations,
                     n_theta: int | None = None) -> np.ndarray:
    """q^SB on surface rings, shape (len(stations), n_theta)."""
    dens = sol.density()
    c = q_prefactor(sol)
    return np.array([c * (ring_weights(ctx, geom, dens.nodes, float(s), n_theta) @ dens.values)
                     for s in stations])


# ---------------------------------------------------------------------------
# cutoff and velocity ansatz
# ---------------------------------------------------------------------------


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)


def smoothstep_d(x):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * x * x * (1.0 - x) ** 2, 0.0)


@dataclass(frozen=True)
class Cutoff:
    """Equals 1 up to s_in = 1 - 2 eps^(4/3), 0 from s_out = 1 - eps^(4/3)."""

    s_in: float
    s_out: float

    @classmethod
    def for_eps(cls, eps: float) -> "Cutoff":
        e = eps ** (4.0 / 3.0)
        return cls(1.0 - 2.0 * e, 1.0 - e)

    def __call__(self, s):
        x = (np.asarray(s, dtype=float) - self.s_in) / (self.s_out - self.s_in)
        return 1.0 - smoothstep(x)

    def derivative(self, s):
        x = (np.asarray(s, dtype=float) - self.s_in) / (self.s_out - self.s_in)
        return -smoothstep_d(x) / (self.s_out - self.s_in)


class VelocityAnsatz:
    """Interior Poiseuille-type velocity built from the 1D pressure.

    p' comes from the solver's nodal fluxes and p'' from F = (a^4 p')',
    combined in a cubic Hermite interpolant so the radial part is continuous.
    """

    def __init__(self, geom: VesselGeometry, sol: Solution1D, cutoff: Cutoff | None = None):
        self.geom = geom
        self.sol = sol
        self.mu = sol.params.mu
        self.cutoff = cutoff or Cutoff.for_eps(geom.eps)
        self._dp = CubicHermiteSpline(sol.s, sol.dp(), sol.d2p())
        self.s_max = float(sol.s[-1])

    def dp(self, s):
        return self._dp(s)

    def d2p(self, s):
        return self._dp(s, 1)

    def _check(self, r, s):
        r, s = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(s, dtype=float))
        if np.any(s < 0) or np.any(s > 1):
            raise DomainError("arclength outside [0, 1]")
        ea = self.geom.eps * self.geom.a(s)
        if np.any(r < 0) or np.any(r > ea * (1.0 + 1e-12)):
            raise DomainError("point outside the vessel cross section")
        return r, s

    def _pieces(self, s):
        """phi, phi', a, a', p', p'' with p-derivatives zeroed past the cutoff."""
        g = self.geom
        phi = self.cutoff(s)
        dphi = self.cutoff.derivative(s)
        live = phi > 0
        sc = np.where(live, np.minimum(s, self.s_max), 0.0)
        dp = np.where(live, self.dp(sc), 0.0)
        d2p = np.where(live, self.d2p(sc), 0.0)
        a = g.a(sc)
        da = np.where(live, g.da(sc), 0.0)
        return phi, dphi, a, da, dp, d2p

    def components(self, r, theta, s):
        """(U_r, U_t) at curvilinear points."""
        r, s = self._check(r, s)
        eps2 = self.geom.eps ** 2
        phi, dphi, a, da, dp, d2p = self._pieces(s)
        g = r ** 3 - 2.0 * eps2 * a * a * r
        dg = -4.0 * eps2 * a * da * r
        ur = -(dphi * g * dp + phi * dg * dp + phi * g * d2p) / (16.0 * self.mu)
        ea = self.geom.eps * a
        # factored so the wall value r = eps a is exactly zero
        ut = phi * (r - ea) * (r + ea) * dp / (4.0 * self.mu)
        return ur, ut

    def cartesian(self, r, theta, s):
        ur, ut = self.components(r, theta, s)
        et, er, _ = radial_vectors(self.geom, s, theta)
        return ur[..., None] * er + ut[..., None] * et

    def divergence(self, r, theta, s):
        """Closed-form curvilinear divergence of the ansatz."""
        r, s = self._check(r, s)
        eps2 = self.geom.eps ** 2
        phi, dphi, a, da, dp, d2p = self._pieces(s)
        h = 5.0 * r ** 3 - 6.0 * eps2 * a * a * r
        dh = -12.0 * eps2 * a * da * r
        ds_term = dphi * h * dp + phi * dh * dp + phi * h * d2p
        kh = kappa_hat(self.geom, s, theta)
        return kh * ds_term / (16.0 * self.mu * (1.0 - r * kh))

    def at_points(self, x):
        """Cartesian velocity at Cartesian interior points."""
        r, th, s = locate(self.geom, x)
        return self.cartesian(r, th, s)


def velocity_ansatz(geom: VesselGeometry, sol: Solution1D, r, theta, s):
    return VelocityAnsatz(geom, sol).components(r, theta, s)


def ansatz_divergence(geom: VesselGeometry, sol: Solution1D, r, theta, s):
    return VelocityAnsatz(geom, sol).divergence(r, theta, s)


def fd_divergence(ansatz: VelocityAnsatz, r, theta, s, h: float) -> np.ndarray:
    """Centered Cartesian finite-difference divergence at curvilinear points."""
    x0 = point(ansatz.geom, r, theta, s)
    flat = np.atleast_2d(x0).reshape(-1, 3)
    div = np.zeros(flat.shape[0])
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        up = ansatz.at_points(flat + e)[:, k]
        dn = ansatz.at_points(flat - e)[:, k]
        div += (up - dn) / (2.0 * h)
    return div.reshape(np.shape(x0)[:-1])


def wall_flux_density(geom: VesselGeometry, sol: Solution1D, s, theta, ansatz: VelocityAnsatz | None = None):
    """(U . n) J_eps on the wall, restricted to the plateau of the cutoff."""
    ans = ansatz or VelocityAnsatz(geom, sol)
    s, theta = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(theta, dtype=float))
    if np.any(s > ans.cutoff.s_in):
        raise CutoffZoneError("wall flux requested outside the plateau of the cutoff")
    r = geom.eps * geom.a(s)
    U = ans.cartesian(r, theta, s)
    n = surface_normal(geom, s, theta)
    return np.sum(U * n, axis=-1) * surface_jacobian(geom, s, theta)


def plateau_nodes(sol: Solution1D, cutoff: Cutoff | None = None) -> np.ndarray:
    c = cutoff or Cutoff.for_eps(sol.geom.eps)
    return sol.s[sol.s <= c.s_in]


def tangential_defect(geom: VesselGeometry, sol: Solution1D, s, theta, ansatz: VelocityAnsatz | None = None):
    """U - (U . n) n on the wall together with the closed form
    -(eps a' / sqrt(1 + eps^2 a'^2)) U_r n_perp, where
    n_perp = -(eps a' e_r + e_t) / sqrt(1 + eps^2 a'^2) is the in-plane unit
    tangent orthogonal to n pointing back toward the wall end."""
    ans = ansatz or VelocityAnsatz(geom, sol)
    r = geom.eps * geom.a(s)
    ur, _ = ans.components(r, theta, s)
    U = ans.cartesian(r, theta, s)
    n = surface_normal(geom, s, theta)
    defect = U - np.sum(U * n, axis=-1)[..., None] * n
    et, er, _ = radial_vectors(geom, s, theta)
    ead = (geom.eps * geom.da(s))[..., None]
    root = np.sqrt(1.0 + ead ** 2)
    n_perp = -(ead * er + et) / root
    closed = -(ead / root) * ur[..., None] * n_perp
    return defect, closed


# ---------------------------------------------------------------------------
# theta variation and far field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaVariation:
    stations: np.ndarray
    section: np.ndarray  # L2(theta) deviation per station
    surface: float  # full-surface L2(Gamma) deviation
    area: float


def theta_variation(ctx: KernelContext, geom: VesselGeometry, sol: Solution1D, s=None,
                    n_theta: int | None = None):
    """Deviation of q^SB from its theta-mean on the wall.

    With a scalar ``s`` returns the L2(theta) deviation of that ring. Without
    ``s`` returns a :class:`ThetaVariation` over all solver nodes, whose
    ``surface`` field is the J_eps-weighted L2 norm on the wall (trapezoid in s).
    """
    n_theta = n_theta or ctx.n_theta
    dth = 2.0 * np.pi / n_theta
    th = dth * np.arange(n_theta)
    if s is not None:
        if not 0.0 <= float(s) < 1.0:
            raise DomainError("ring requires 0 <= s < 1")
        q = surface_pressure(ctx, geom, sol, [s], n_theta)[0]
        dev = q - q.mean()
        return float(np.sqrt(np.sum(dev ** 2) * dth))
    st = sol.s
    q = surface_pressure(ctx, geom, sol, st, n_theta)
    dev = q - q.mean(axis=1, keepdims=True)
    J = surface_jacobian(geom, st[:, None], th[None, :])
    ring_sq = np.sum(dev ** 2 * J, axis=1) * dth
    ring_area = np.sum(J, axis=1) * dth
    h = np.diff(st)
    total = float(np.sum(0.5 * h * (ring_sq[1:] + ring_sq[:-1])))
    area = float(np.sum(0.5 * h * (ring_area[1:] + ring_area[:-1])))
    section = np.sqrt(np.sum(dev ** 2, axis=1) * dth)
    return ThetaVariation(st.copy(), section, math.sqrt(total), area)


def far_field_ratio(ctx: KernelContext, geom: VesselGeometry, sol: Solution1D, radius: float = 50.0,
                    direction=(0.6, 0.0, 0.8)) -> float:
    """q(x) |x| divided by the monopole limit pi/(8 zeta mu) * 2 * (1/4 pi) * int F dt."""
    d = np.asarray(direction, dtype=float)
    x = radius * d / np.linalg.norm(d)
    q = exterior_pressure(ctx, geom, sol, x)
    dens = sol.density()
    total = float(np.trapezoid(dens.values, dens.nodes)) if hasattr(np, "trapezoid") else float(
        np.trapz(dens.values, dens.nodes))
    factor = 2.0 if ctx.image else 1.0
    limit = q_prefactor(sol) * factor * total / (4.0 * math.pi)
    return q * radius / limit


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass
class FieldSampleGrid:
    points: np.ndarray
    tags: np.ndarray  # "interior" | "exterior" | "wall-below"
    pressure: np.ndarray
    velocity: np.ndarray

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "tag", "value", "ux", "uy", "uz"])
            for x, t, q, u in zip(self.points, self.tags, self.pressure, self.velocity):
                w.writerow([repr(float(x[0])), repr(float(x[1])), repr(float(x[2])), t,
                            repr(float(q)), repr(float(u[0])), repr(float(u[1])), repr(float(u[2]))])


def box_points(lo, hi, shape) -> np.ndarray:
    axes = [np.linspace(l, h, n) for l, h, n in zip(lo, hi, shape)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def sample_fields(ctx: KernelContext, geom: VesselGeometry, sol: Solution1D, points) -> FieldSampleGrid:
    """Exterior pressure at exterior points, interior pressure and velocity
    inside the vessel; points below the wall are tagged and left as NaN."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    tags = np.full(n, "exterior", dtype=object)
    pressure = np.full(n, np.nan)
    velocity = np.zeros((n, 3))
    below = pts[:, 2] < 0
    tags[below] = "wall-below"
    inside = np.zeros(n, dtype=bool)
    inside[~below] = is_interior(geom, pts[~below], rel_tol=0.0)
    tags[inside] = "interior"
    ext = ~below & ~inside
    if np.any(ext):
        pressure[ext] = exterior_pressure(ctx, geom, sol, pts[ext])
    if np.any(inside):
        r, th, s = locate(geom, pts[inside])
        s_ok = np.minimum(s, sol.s[-1])
        pressure[inside] = np.interp(s_ok, sol.s, sol.p)
        velocity[inside] = VelocityAnsatz(geom, sol).cartesian(np.minimum(r, geom.eps * geom.a(s)), th, s)
    velocity[below] = np.nan
    return FieldSampleGrid(pts, tags, pressure, velocity)
