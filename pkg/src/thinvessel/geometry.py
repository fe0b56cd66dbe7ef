"""Vessel geometry: centerline, Bishop frame, radius profile and surface measures.

Arrays follow numpy broadcasting throughout. Points and vectors carry a
trailing axis of length 3; arclength ``s`` and angle ``theta`` broadcast
against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import CubicSpline

from .errors import DomainError, GeometryValidationError, TipSingularityError

E_X = np.array([1.0, 0.0, 0.0])
E_Y = np.array([0.0, 1.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])

_S_TOL = 1e-12


def _as_s(s, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < lo - _S_TOL) or np.any(s > hi + _S_TOL) or np.any(~np.isfinite(s)):
        raise DomainError(f"arclength outside [{lo}, {hi}]")
    return np.clip(s, lo, hi)


# ---------------------------------------------------------------------------
# Centerlines
# ---------------------------------------------------------------------------


class Centerline:
    """Unit-length arclength-parameterized curve starting on the wall z = 0."""

    kind = "abstract"

    def position(self, s) -> np.ndarray:
        raise NotImplementedError

    def tangent(self, s) -> np.ndarray:
        raise NotImplementedError

    def second_derivative(self, s) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def sample(self, n: int = 513) -> "CenterlineSamples":
        s = np.linspace(0.0, 1.0, n)
        return CenterlineSamples(s, self.position(s), self.tangent(s), self.second_derivative(s))


@dataclass(frozen=True)
class CenterlineSamples:
    s: np.ndarray
    X: np.ndarray
    Xs: np.ndarray
    Xss: np.ndarray


class StraightCenterline(Centerline):
    kind = "straight"

    def position(self, s):
        s = np.asarray(s, dtype=float)
        return s[..., None] * E_Z

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(E_Z, s.shape + (3,)).copy()

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.zeros(s.shape + (3,))

    def to_dict(self):
        return {"kind": self.kind}


class ArcCenterline(Centerline):
    """Planar circular arc in the xz-plane, leaving the wall along +z."""

    kind = "arc"

    def __init__(self, radius: float = 1.0):
        if not radius > 1.0 / math.pi:
            # the arc must not return to the wall before s = 1
            raise GeometryValidationError("arc radius must exceed 1/pi")
        self.radius = float(radius)

    def position(self, s):
        s = np.asarray(s, dtype=float)
        R = self.radius
        phi = s / R
        return np.stack([R * (1.0 - np.cos(phi)), np.zeros_like(s), R * np.sin(phi)], axis=-1)

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        phi = s / self.radius
        return np.stack([np.sin(phi), np.zeros_like(s), np.cos(phi)], axis=-1)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        R = self.radius
        phi = s / R
        return np.stack([np.cos(phi), np.zeros_like(s), -np.sin(phi)], axis=-1) / R

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius}


class PolynomialCenterline(Centerline):
    """Polynomial curve P(u), u in [0, 1], rescaled to unit length and
    re-parameterized by exact arclength.

    ``coefficients`` has shape (3, deg + 1) in increasing powers of u.
    The inverse arclength map u(s) is held as a Chebyshev interpolant whose
    accuracy is verified against Gauss-Legendre arclength quadrature.
    """

    kind = "polynomial"

    def __init__(self, coefficients, cheb_degree: int = 96):
        c = np.atleast_2d(np.asarray(coefficients, dtype=float))
        if c.shape[0] != 3:
            raise GeometryValidationError("polynomial coefficients must have shape (3, deg+1)")
        self.coefficients = c
        self._d1 = [npoly.polyder(ci) if ci.size > 1 else np.zeros(1) for ci in c]
        self._d2 = [npoly.polyder(ci, 2) if ci.size > 2 else np.zeros(1) for ci in c]

        P0 = self._eval(c, 0.0)
        dP0 = self._eval(self._d1, 0.0)
        if abs(P0[2]) > 1e-12:
            raise GeometryValidationError("polynomial centerline must start on z = 0")
        if np.linalg.norm(dP0) == 0.0 or np.linalg.norm(dP0[:2]) > 1e-12 * np.linalg.norm(dP0) or dP0[2] < 0:
            raise GeometryValidationError("polynomial centerline must leave the wall along +z")

        u_fine = np.linspace(0.0, 1.0, 2049)
        speed = np.linalg.norm(self._eval(self._d1, u_fine), axis=-1)
        if speed.min() <= 1e-10 * max(speed.max(), 1e-300):
            raise GeometryValidationError("degenerate centerline (vanishing speed)")
        self._gl_x, self._gl_w = np.polynomial.legendre.leggauss(24)
        self.length = float(self._arclength(np.array([1.0]))[0])

        # invert s(u) on Chebyshev points of s, doubling the degree until the
        # interpolant reproduces the arclength
        check = np.linspace(0.0, 1.0, 257)
        degree = cheb_degree
        while True:
            self._u_of_s = self._invert(degree)
            err = np.max(np.abs(self._arclength(self._u_of_s(check)) / self.length - check))
            if err <= 1e-11 or degree >= 8 * cheb_degree:
                break
            degree *= 2
        if err > 1e-11:
            raise GeometryValidationError(f"arclength re-parameterization inaccurate ({err:.2e})")

    def _invert(self, degree: int) -> Chebyshev:
        k = np.arange(degree + 1)
        s_nodes = 0.5 * (1.0 - np.cos(np.pi * k / degree))
        u_fine = np.linspace(0.0, 1.0, 4 * degree + 1)
        u = np.interp(s_nodes, self._arclength(u_fine) / self.length, u_fine)
        for _ in range(60):
            g = self._arclength(u) / self.length - s_nodes
            du = g * self.length / np.linalg.norm(self._eval(self._d1, u), axis=-1)
            u = np.clip(u - du, 0.0, 1.0)
            if np.max(np.abs(du)) < 1e-15:
                break
        return Chebyshev.fit(s_nodes, u, degree, domain=[0.0, 1.0])

    @staticmethod
    def _eval(coeffs, u):
        u = np.asarray(u, dtype=float)
        return np.stack([npoly.polyval(u, ci) for ci in coeffs], axis=-1)

    def _arclength(self, u):
        # composite Gauss-Legendre on 8 equal pieces of [0, u]
        u = np.asarray(u, dtype=float)
        m = 8
        tq = ((np.arange(m)[:, None] + 0.5 * (self._gl_x + 1.0)[None, :]) / m).ravel()
        wq = np.tile(self._gl_w, m) / m
        pts = u[..., None] * tq
        sp = np.linalg.norm(self._eval(self._d1, pts), axis=-1)
        return 0.5 * u * np.sum(sp * wq, axis=-1)

    def position(self, s):
        u = self._u_of_s(np.asarray(s, dtype=float))
        return self._eval(self.coefficients, u) / self.length

    def tangent(self, s):
        u = self._u_of_s(np.asarray(s, dtype=float))
        d1 = self._eval(self._d1, u)
        return d1 / np.linalg.norm(d1, axis=-1, keepdims=True)

    def second_derivative(self, s):
        u = self._u_of_s(np.asarray(s, dtype=float))
        d1 = self._eval(self._d1, u)
        d2 = self._eval(self._d2, u)
        sp = np.linalg.norm(d1, axis=-1, keepdims=True)
        T = d1 / sp
        dT_du = (d2 - T * np.sum(T * d2, axis=-1, keepdims=True)) / sp
        return dT_du * self.length / sp

    def to_dict(self):
        return {"kind": self.kind, "coefficients": self.coefficients.tolist()}


def centerline_from_dict(d: dict[str, Any]) -> Centerline:
    kind = d.get("kind", "straight")
    if kind == "straight":
        return StraightCenterline()
    if kind == "arc":
        return ArcCenterline(d.get("radius", 1.0))
    if kind == "polynomial":
        return PolynomialCenterline(d["coefficients"])
    raise GeometryValidationError(f"unknown centerline kind {kind!r}")


# ---------------------------------------------------------------------------
# Radius profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusProfile:
    """Dimensionless radius shape a(s) on [0, 1].

    ``tabulated`` profiles are stored as a cubic spline of the shape factor
    a(s) / sqrt(1 - s^2), so the spheroidal square-root decay at the tip is
    represented exactly.
    """

    kind: str = "spheroidal"
    samples_s: tuple[float, ...] = ()
    samples_a: tuple[float, ...] = ()
    delta: float = 0.1
    a0: float | None = None
    tip_constant: float = 10.0
    _spline: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "spheroidal":
            return
        if self.kind != "tabulated":
            raise GeometryValidationError(f"unknown radius kind {self.kind!r}")
        s = np.asarray(self.samples_s, dtype=float)
        a = np.asarray(self.samples_a, dtype=float)
        if s.size < 4 or s.shape != a.shape:
            raise GeometryValidationError("tabulated radius needs >= 4 matching samples")
        if np.any(np.diff(s) <= 0) or s[0] != 0.0:
            raise GeometryValidationError("tabulated radius samples must start at 0 and increase")
        keep = s < 1.0
        w = np.sqrt(1.0 - s[keep] ** 2)
        object.__setattr__(self, "_spline", CubicSpline(s[keep], a[keep] / w))

    def value(self, s):
        s = np.asarray(s, dtype=float)
        w = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
        if self.kind == "spheroidal":
            return w
        return self._spline(s) * w

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        w2 = np.clip(1.0 - s * s, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.sqrt(w2)
            dw = -s / w
        if self.kind == "spheroidal":
            return dw
        g = self._spline(s)
        return self._spline(s, 1) * w + g * dw

    def a_da(self, s):
        """Product a a', finite up to and including the tip."""
        s = np.asarray(s, dtype=float)
        if self.kind == "spheroidal":
            return -s
        g = self._spline(s)
        return -s * g * g + g * self._spline(s, 1) * (1.0 - s * s)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        w2 = np.clip(1.0 - s * s, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.sqrt(w2)
            dw = -s / w
            d2w = -1.0 / (w2 * w)
        if self.kind == "spheroidal":
            return d2w
        g = self._spline(s)
        return self._spline(s, 2) * w + 2.0 * self._spline(s, 1) * dw + g * d2w

    def to_dict(self):
        d: dict[str, Any] = {"kind": self.kind, "delta": self.delta, "tip_constant": self.tip_constant}
        if self.a0 is not None:
            d["a0"] = self.a0
        if self.kind == "tabulated":
            d["samples_s"] = list(self.samples_s)
            d["samples_a"] = list(self.samples_a)
        return d


def radius_from_dict(d: dict[str, Any]) -> RadiusProfile:
    return RadiusProfile(
        kind=d.get("kind", "spheroidal"),
        samples_s=tuple(d.get("samples_s", ())),
        samples_a=tuple(d.get("samples_a", ())),
        delta=float(d.get("delta", 0.1)),
        a0=d.get("a0"),
        tip_constant=float(d.get("tip_constant", 10.0)),
    )


# ---------------------------------------------------------------------------
# Bishop frame
# ---------------------------------------------------------------------------


def _frame_rhs(centerline: Centerline, s, e1):
    # rotation-minimizing transport of e1: e1' = -(e1 . X_ss) X_s
    Xs = centerline.tangent(s)
    Xss = centerline.second_derivative(s)
    return -np.sum(e1 * Xss, axis=-1, keepdims=True) * Xs


def _rk4_step(centerline: Centerline, s, e1, h):
    h_ = np.asarray(h)[..., None]
    k1 = _frame_rhs(centerline, s, e1)
    k2 = _frame_rhs(centerline, s + 0.5 * h, e1 + 0.5 * h_ * k1)
    k3 = _frame_rhs(centerline, s + 0.5 * h, e1 + 0.5 * h_ * k2)
    k4 = _frame_rhs(centerline, s + h, e1 + h_ * k3)
    return e1 + h_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _orthonormalize(e1, et):
    e1 = e1 - np.sum(e1 * et, axis=-1, keepdims=True) * et
    return e1 / np.linalg.norm(e1, axis=-1, keepdims=True)


@dataclass(frozen=True)
class BishopFrame:
    centerline: Centerline
    s: np.ndarray
    e_t: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    kappa_star: float

    def at(self, s):
        """Frame (e_t, e1, e2) at arbitrary arclength by one RK4 step from the
        nearest sample to the left."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.s.size - 1)
        s0 = self.s[idx]
        e1 = _rk4_step(self.centerline, s0, self.e1[idx], s - s0)
        et = self.centerline.tangent(s)
        e1 = _orthonormalize(e1, et)
        e2 = np.cross(et, e1)
        return et, e1, e2

    def curvatures(self, s):
        et, e1, e2 = self.at(s)
        Xss = self.centerline.second_derivative(s)
        return np.sum(Xss * e1, axis=-1), np.sum(Xss * e2, axis=-1)


def build_bishop_frame(centerline: Centerline, n_samples: int = 1025, e1_initial=E_X) -> BishopFrame:
    if n_samples < 2:
        raise GeometryValidationError("need at least two frame samples")
    e1_0 = np.asarray(e1_initial, dtype=float)
    t0 = centerline.tangent(np.array(0.0))
    if abs(np.linalg.norm(t0) - 1.0) > 1e-10:
        raise GeometryValidationError("centerline tangent is not unit length")
    if abs(np.linalg.norm(e1_0) - 1.0) > 1e-10:
        raise GeometryValidationError("initial normal must be a unit vector")
    if abs(float(np.dot(e1_0, t0))) > 1e-10:
        raise GeometryValidationError("initial normal is not perpendicular to X_s(0)")

    s = np.linspace(0.0, 1.0, n_samples)
    e1 = np.empty((n_samples, 3))
    e1[0] = e1_0
    h = s[1] - s[0]
    for k in range(n_samples - 1):
        nxt = _rk4_step(centerline, s[k], e1[k], h)
        e1[k + 1] = _orthonormalize(nxt, centerline.tangent(s[k + 1]))
    et = centerline.tangent(s)
    e2 = np.cross(et, e1)
    Xss = centerline.second_derivative(s)
    k1 = np.sum(Xss * e1, axis=-1)
    k2 = np.sum(Xss * e2, axis=-1)
    kstar = float(np.max(np.linalg.norm(Xss, axis=-1)))
    return BishopFrame(centerline, s, et, e1, e2, k1, k2, kstar)


# ---------------------------------------------------------------------------
# Vessel geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VesselGeometry:
    centerline: Centerline
    radius: RadiusProfile
    frame: BishopFrame
    eps: float

    @classmethod
    def build(cls, centerline: Centerline, radius: RadiusProfile, eps: float,
              n_frame: int = 1025, e1_initial=E_X) -> "VesselGeometry":
        if not eps > 0:
            raise GeometryValidationError("eps must be positive")
        return cls(centerline, radius, build_bishop_frame(centerline, n_frame, e1_initial), float(eps))

    @classmethod
    def straight(cls, eps: float, **kw) -> "VesselGeometry":
        return cls.build(StraightCenterline(), RadiusProfile(), eps, **kw)

    @classmethod
    def arc(cls, eps: float, radius_of_curvature: float = 1.0, **kw) -> "VesselGeometry":
        return cls.build(ArcCenterline(radius_of_curvature), RadiusProfile(), eps, **kw)

    def with_eps(self, eps: float) -> "VesselGeometry":
        return VesselGeometry(self.centerline, self.radius, self.frame, float(eps))

    @property
    def kappa_star(self) -> float:
        return self.frame.kappa_star

    def a(self, s):
        return self.radius.value(s)

    def da(self, s):
        return self.radius.derivative(s)

    def to_dict(self):
        return {"centerline": self.centerline.to_dict(), "radius": self.radius.to_dict(), "eps": self.eps}


def geometry_from_dict(d: dict[str, Any]) -> VesselGeometry:
    return VesselGeometry.build(
        centerline_from_dict(d.get("centerline", {})),
        radius_from_dict(d.get("radius", {})),
        float(d.get("eps", 0.05)),
        n_frame=int(d.get("n_frame", 1025)),
    )


def radial_vectors(geom: VesselGeometry, s, theta):
    """Return (e_t, e_r, e_theta) at (s, theta)."""
    s, theta = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(theta, dtype=float))
    et, e1, e2 = geom.frame.at(s)
    c = np.cos(theta)[..., None]
    sn = np.sin(theta)[..., None]
    return et, c * e1 + sn * e2, -sn * e1 + c * e2


def kappa_hat(geom: VesselGeometry, s, theta):
    s, theta = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(theta, dtype=float))
    k1, k2 = geom.frame.curvatures(s)
    return k1 * np.cos(theta) + k2 * np.sin(theta)


def point(geom: VesselGeometry, r, theta, s):
    """Cartesian point X(s) + r e_r(s, theta)."""
    r, theta, s = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, theta, s)))
    _, er, _ = radial_vectors(geom, s, theta)
    return geom.centerline.position(s) + r[..., None] * er


def surface_point(geom: VesselGeometry, s, theta):
    s = _as_s(s)
    return point(geom, geom.eps * geom.a(s), theta, s)


def surface_normal(geom: VesselGeometry, s, theta):
    s = _as_s(s)
    if np.any(s >= 1.0):
        raise TipSingularityError("normal undefined at the tip s = 1; stop at the last grid node")
    et, er, _ = radial_vectors(geom, s, theta)
    ea = (geom.eps * geom.da(s))[..., None]
    return (er - ea * et) / np.sqrt(1.0 + ea * ea)


def surface_jacobian(geom: VesselGeometry, s, theta):
    s = _as_s(s)
    s, theta = np.broadcast_arrays(s, np.asarray(theta, dtype=float))
    ea = geom.eps * geom.a(s)
    kh = kappa_hat(geom, s, theta)
    # a a' stays bounded at the tip, so the slope term is written through it
    slope = geom.eps ** 2 * geom.radius.a_da(s)
    return np.sqrt((ea * (1.0 - ea * kh)) ** 2 + slope ** 2)


def volume_jacobian(geom: VesselGeometry, r, s, theta):
    r = np.asarray(r, dtype=float)
    s = _as_s(s)
    if np.any(r < 0):
        raise DomainError("negative radial coordinate")
    if geom.kappa_star > 0 and np.any(r >= 0.5 / geom.kappa_star):
        raise DomainError("radial coordinate beyond the injectivity radius 1/(2 kappa*)")
    return r * (1.0 - r * kappa_hat(geom, s, theta))


def locate(geom: VesselGeometry, x, n_seed: int = 1025):
    """Curvilinear coordinates (r, theta, s) of Cartesian points by nearest
    centerline sample followed by projection-Newton."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    xf = x.reshape(-1, 3)
    seeds = np.linspace(0.0, 1.0, n_seed)
    Xseed = geom.centerline.position(seeds)
    idx = np.empty(xf.shape[0], dtype=int)
    for lo in range(0, xf.shape[0], 512):
        d2 = np.sum((xf[lo:lo + 512, None, :] - Xseed[None]) ** 2, axis=-1)
        idx[lo:lo + 512] = np.argmin(d2, axis=1)
    s = seeds[idx]
    cl = geom.centerline
    for _ in range(30):
        d = cl.position(s) - xf
        Xs = cl.tangent(s)
        g = np.sum(d * Xs, axis=-1)
        dg = 1.0 + np.sum(d * cl.second_derivative(s), axis=-1)
        step = g / np.where(np.abs(dg) > 1e-12, dg, 1.0)
        s_new = np.clip(s - step, 0.0, 1.0)
        done = np.max(np.abs(s_new - s)) < 1e-15
        s = s_new
        if done:
            break
    d = xf - cl.position(s)
    et, e1, e2 = geom.frame.at(s)
    r = np.linalg.norm(d, axis=-1)
    theta = np.mod(np.arctan2(np.sum(d * e2, axis=-1), np.sum(d * e1, axis=-1)), 2 * np.pi)
    return r.reshape(shape), theta.reshape(shape), s.reshape(shape)


def is_interior(geom: VesselGeometry, x, rel_tol: float = 1e-9):
    """True where x lies strictly inside the vessel, beyond a relative tolerance."""
    r, theta, s = locate(geom, x)
    x = np.asarray(x, dtype=float)
    et = geom.centerline.tangent(s)
    axial = np.sum((x - geom.centerline.position(s)) * et, axis=-1)
    inside_section = (s > 0) & (s < 1) & (np.abs(axial) <= 1e-9 + 1e-6 * r)
    return inside_section & (r < geom.eps * geom.a(s) * (1.0 - rel_tol))


def lateral_area(geom: VesselGeometry, s_max: float = 1.0, n_s: int = 64, n_theta: int = 32) -> float:
    """Surface area of the vessel wall between s = 0 and s_max."""
    # substitution s = s_max (1 - (1-x)^2) clusters nodes toward the tip
    xg, wg = np.polynomial.legendre.leggauss(n_s)
    x = 0.5 * (xg + 1.0)
    s = s_max * (1.0 - (1.0 - x) ** 2)
    ws = 0.5 * wg * s_max * 2.0 * (1.0 - x)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    J = surface_jacobian(geom, s[:, None], th[None, :])
    return float(np.sum(ws[:, None] * J) * 2 * np.pi / n_theta)


# ---------------------------------------------------------------------------
# Admissibility report
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float | None = None
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value),
                "limit": None if self.limit is None else float(self.limit), "detail": self.detail}


@dataclass
class ValidationReport:
    checks: list[Check]
    measured: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks],
                "measured": {k: float(v) for k, v in self.measured.items()}}


def c_gamma(centerline: Centerline, n: int = 512) -> tuple[float, float, float]:
    """(c_Gamma, chord-arc component, wall-distance component) on an n-point grid."""
    s = np.linspace(0.0, 1.0, n)
    X = centerline.position(s)
    diff = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=-1)
    ds = np.abs(s[:, None] - s[None, :])
    off = ds > 0
    chord = float(np.min(diff[off] / ds[off]))
    wall = float(np.min(X[1:, 2] / s[1:]))
    return min(chord, wall), chord, wall


def validate_admissible(geom: VesselGeometry, n_grid: int = 512) -> ValidationReport:
    checks: list[Check] = []
    cl, rad, eps = geom.centerline, geom.radius, geom.eps
    s = np.linspace(0.0, 1.0, n_grid)

    try:
        Xs = cl.tangent(s)
        X = cl.position(s)
    except Exception as exc:  # pragma: no cover - defensive
        return ValidationReport([Check("centerline_evaluable", False, float("nan"), detail=str(exc))], {})

    speed_err = float(np.max(np.abs(np.linalg.norm(Xs, axis=-1) - 1.0)))
    checks.append(Check("unit_speed", speed_err <= 1e-10, speed_err, 1e-10))
    checks.append(Check("starts_on_wall", abs(X[0, 2]) <= 1e-12, abs(X[0, 2]), 1e-12))
    t0_err = float(np.linalg.norm(Xs[0] - E_Z))
    checks.append(Check("tangent_normal_to_wall", t0_err <= 1e-10, t0_err, 1e-10))
    zmin = float(np.min(X[1:, 2]))
    checks.append(Check("above_wall", zmin > 0, zmin, 0.0))
    cg, chord, wall = c_gamma(cl, n_grid)
    checks.append(Check("c_gamma_positive", cg > 0, cg, 0.0,
                        f"chord-arc {chord:.4g}, wall-distance {wall:.4g}"))

    # radius profile
    a = rad.value(s)
    amax = float(np.max(a))
    checks.append(Check("radius_sup_is_one", abs(amax - 1.0) <= 1e-6, amax, 1.0))
    body = s <= 1.0 - rad.delta
    a0_meas = float(np.min(a[body])) if np.any(body) else float("nan")
    a0_req = rad.a0 if rad.a0 is not None else a0_meas
    checks.append(Check("radius_lower_bound", a0_meas >= a0_req and a0_req > 0, a0_meas, a0_req))
    tip = (s > 1.0 - rad.delta)
    w = np.sqrt(np.clip(1.0 - s[tip] ** 2, 0.0, None))
    dev = np.abs(a[tip] - w) - rad.tip_constant * eps ** 2 * w
    worst = float(np.max(dev)) if dev.size else 0.0
    checks.append(Check("spheroidal_tip", worst <= 1e-12, worst, 0.0, f"C = {rad.tip_constant}"))
    inner = s < 1.0
    with np.errstate(all="ignore"):
        astar = float(np.max(np.abs(a[inner] * rad.derivative(s[inner]))))
        astar2 = float(np.max(np.abs(a[inner] ** 3 * rad.second_derivative(s[inner]))))
    checks.append(Check("a_star_finite", bool(np.isfinite(astar)), astar))
    checks.append(Check("a_star_star_finite", bool(np.isfinite(astar2)), astar2))

    # frame
    fr = geom.frame
    E = np.stack([fr.e_t, fr.e1, fr.e2], axis=1)
    orth = float(np.max(np.abs(np.einsum("nij,nkj->nik", E, E) - np.eye(3))))
    checks.append(Check("frame_orthonormal", orth <= 1e-9, orth, 1e-9))
    curv = float(np.max(np.abs(fr.kappa1 ** 2 + fr.kappa2 ** 2
                               - np.sum(cl.second_derivative(fr.s) ** 2, axis=-1))))
    checks.append(Check("curvature_identity", curv <= 1e-8, curv, 1e-8))

    # vessel
    kstar = geom.kappa_star
    bound = math.inf if kstar == 0 else 1.0 / (8.0 * kstar)
    checks.append(Check("eps_below_curvature_bound", eps < bound, eps, bound))
    inj = _injectivity_margin(geom)
    checks.append(Check("tube_injective", inj > 0, inj, 0.0))

    measured = {"c_gamma": cg, "kappa_star": kstar, "a_star": astar, "a_star_star": astar2, "a0": a0_meas}
    return ValidationReport(checks, measured)


def _injectivity_margin(geom: VesselGeometry, n_s: int = 256, n_theta: int = 8) -> float:
    # surface points at r = 2 eps a(s) must be farther from every distant part
    # of the centerline than from their own cross section
    s = np.linspace(0.0, 1.0, n_s)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    S, T = np.meshgrid(s, th, indexing="ij")
    r = 2.0 * geom.eps * geom.a(S)
    x = point(geom, r, T, S).reshape(-1, 3)
    rr = r.reshape(-1)
    sf = S.reshape(-1)
    sc = np.linspace(0.0, 1.0, 1024)
    Xc = geom.centerline.position(sc)
    window = max(4.0 * geom.eps, 4.0 / n_s)
    margin = math.inf
    for lo in range(0, x.shape[0], 256):
        d = np.linalg.norm(x[lo:lo + 256, None, :] - Xc[None], axis=-1)
        far = np.abs(sf[lo:lo + 256, None] - sc[None, :]) >= window
        d = np.where(far, d, np.inf)
        margin = min(margin, float(np.min(np.min(d, axis=1) - rr[lo:lo + 256])))
    return margin
