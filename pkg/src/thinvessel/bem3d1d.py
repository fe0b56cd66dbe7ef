"""Boundary-element solver for the coupled 3D-1D Darcy-Poiseuille system.

The exterior pressure is a single-layer potential q = V sigma with piecewise
constant density on (s, theta) panels of the vessel wall. Robin rows are
collocated at panel centres. Each s-cell carries one interior pressure and
one flux-balance row that integrates the wall flux over its ring of panels
against the conservative degenerate Poiseuille stencil.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ConditioningError, ConfigError, ConvergenceError
from .geometry import VesselGeometry, point, surface_jacobian, surface_normal
from .greens import reflect
from .solver1d import Mesh1D, Params, Solution1D, ha_norm_values

FOUR_PI = 4.0 * math.pi


# ---------------------------------------------------------------------------
# parametric surfaces
# ---------------------------------------------------------------------------


class VesselSurface:
    """Wall of the vessel parameterized by (s, theta)."""

    periodic_v = True

    def __init__(self, geom: VesselGeometry):
        self.geom = geom

    def point(self, u, v):
        return point(self.geom, self.geom.eps * self.geom.a(u), v, u)

    def jacobian(self, u, v):
        return surface_jacobian(self.geom, u, v)

    def normal(self, u, v):
        return surface_normal(self.geom, u, v)


class SphereSurface:
    """Unit sphere parameterized by polar angle u in [0, pi] and azimuth v."""

    periodic_v = True

    def __init__(self, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def normal(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return np.stack([np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)], axis=-1)

    def point(self, u, v):
        return self.center + self.radius * self.normal(u, v)

    def jacobian(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return self.radius ** 2 * np.sin(u)


# ---------------------------------------------------------------------------
# panel mesh
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _tensor_rule(n: int, mu: int = 1, mv: int = 1):
    """Gauss rule on [0,1]^2 split into mu x mv sub-squares: (u, v, w)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    ou = (np.arange(mu)[:, None] + x[None, :]).ravel() / mu
    ov = (np.arange(mv)[:, None] + x[None, :]).ravel() / mv
    wu = np.tile(w, mu) / mu
    wv = np.tile(w, mv) / mv
    U, V = np.meshgrid(ou, ov, indexing="ij")
    W = np.outer(wu, wv)
    return U.ravel(), V.ravel(), W.ravel()


@lru_cache(maxsize=None)
def _duffy_rule(n: int):
    """Rule on [0,1]^2 for integrands singular like 1/rho at the centre."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    xi, eta = np.meshgrid(x, x, indexing="ij")
    wq = np.outer(w, w)
    c = np.array([0.5, 0.5])
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    us, vs, ws = [], [], []
    for k in range(4):
        p1, p2 = corners[k], corners[(k + 1) % 4]
        e1 = p1 - c
        e2 = p2 - p1
        det = abs(e1[0] * e2[1] - e1[1] * e2[0])
        pts = c + xi[..., None] * (e1 + eta[..., None] * e2)
        us.append(pts[..., 0].ravel())
        vs.append(pts[..., 1].ravel())
        ws.append((wq * xi * det).ravel())
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ws)


@dataclass
class BoundaryMesh:
    surface: object
    u_edges: np.ndarray
    v_edges: np.ndarray
    centers: np.ndarray  # (P, 3) collocation points
    normals: np.ndarray  # (P, 3)
    areas: np.ndarray  # (P,)
    uc: np.ndarray
    vc: np.ndarray
    iu: np.ndarray  # station (u-cell) index of each panel
    iv: np.ndarray
    len_u: np.ndarray
    len_v: np.ndarray
    radius: np.ndarray  # circumradius about the centre
    mesh1d: Mesh1D | None = None

    @property
    def n_panels(self) -> int:
        return self.centers.shape[0]

    @property
    def n_u(self) -> int:
        return self.u_edges.size - 1

    @property
    def n_v(self) -> int:
        return self.v_edges.size - 1

    def diameters(self) -> np.ndarray:
        return 2.0 * self.radius

    def rect(self, j: int):
        return (self.u_edges[self.iu[j]], self.u_edges[self.iu[j] + 1],
                self.v_edges[self.iv[j]], self.v_edges[self.iv[j] + 1])


def panel_mesh(surface, u_edges, v_edges, mesh1d: Mesh1D | None = None, area_order: int = 4) -> BoundaryMesh:
    u_edges = np.asarray(u_edges, dtype=float)
    v_edges = np.asarray(v_edges, dtype=float)
    nu, nv = u_edges.size - 1, v_edges.size - 1
    IU, IV = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    iu, iv = IU.ravel(), IV.ravel()
    u1, u2 = u_edges[iu], u_edges[iu + 1]
    v1, v2 = v_edges[iv], v_edges[iv + 1]
    uc, vc = 0.5 * (u1 + u2), 0.5 * (v1 + v2)
    centers = surface.point(uc, vc)
    normals = surface.normal(uc, vc)
    ru, rv, rw = _tensor_rule(area_order)
    U = u1[:, None] + (u2 - u1)[:, None] * ru
    V = v1[:, None] + (v2 - v1)[:, None] * rv
    areas = np.sum(surface.jacobian(U, V) * rw * ((u2 - u1) * (v2 - v1))[:, None], axis=1)
    su = np.array([0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0, 0.0])
    sv = np.array([0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 0.5])
    edge = surface.point(u1[:, None] + (u2 - u1)[:, None] * su, v1[:, None] + (v2 - v1)[:, None] * sv)
    radius = np.max(np.linalg.norm(edge - centers[:, None, :], axis=-1), axis=1)
    len_u = np.linalg.norm(edge[:, 3] - edge[:, 7], axis=-1)
    len_v = np.linalg.norm(edge[:, 5] - edge[:, 1], axis=-1)
    return BoundaryMesh(surface, u_edges, v_edges, centers, normals, areas, uc, vc, iu, iv,
                        len_u, len_v, radius, mesh1d)


def build_boundary_mesh(geom: VesselGeometry, n_s: int, n_theta: int, h_min: float | None = None,
                        mesh1d: Mesh1D | None = None) -> BoundaryMesh:
    """Panels on the wall with s-edges at the nodes of the shared 1D mesh."""
    if n_theta < 8:
        raise ConfigError("n_theta must be at least 8")
    if mesh1d is None:
        mesh1d = Mesh1D.graded(n_s, geom.eps ** 2 if h_min is None else h_min)
    elif mesh1d.n != n_s:
        raise ConfigError("n_s must equal the number of 1D mesh intervals")
    v = np.linspace(0.0, 2.0 * np.pi, n_theta + 1)
    return panel_mesh(VesselSurface(geom), mesh1d.nodes, v, mesh1d)


def sphere_mesh(n_u: int = 16, n_v: int = 16, radius: float = 1.0) -> BoundaryMesh:
    return panel_mesh(SphereSurface(radius), np.linspace(0.0, np.pi, n_u + 1),
                      np.linspace(0.0, 2.0 * np.pi, n_v + 1))


# ---------------------------------------------------------------------------
# layer-potential matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BemQuadrature:
    far_order: int = 4
    near_factor: float = 2.0  # near when centre distance < near_factor * diameter + radius
    sub_order: int = 4
    max_sub: int = 32
    duffy_order: int = 12


def _rect_points(surface, rect, ru, rv, rw, image: bool):
    u1, u2, v1, v2 = rect
    u = u1 + (u2 - u1) * ru
    v = v1 + (v2 - v1) * rv
    Y = surface.point(u, v)
    if image:
        Y = reflect(Y)
    w = rw * (u2 - u1) * (v2 - v1) * surface.jacobian(u, v)
    return Y, w


def _near_rule(rect, len_u, len_v, D, q: BemQuadrature):
    mu = int(min(q.max_sub, max(1, math.ceil(2.0 * len_u / max(D, 1e-300)))))
    mv = int(min(q.max_sub, max(1, math.ceil(2.0 * len_v / max(D, 1e-300)))))
    return _tensor_rule(q.sub_order, mu, mv)


def _self_pieces(rect, len_u, len_v):
    """Split a panel along its long direction into an odd number of pieces;
    returns (centre piece, [other pieces], lengths of the centre piece)."""
    u1, u2, v1, v2 = rect
    if len_u >= len_v:
        k = int(min(31, max(1, round(len_u / max(len_v, 1e-300)))))
        k += (k + 1) % 2
        e = np.linspace(u1, u2, k + 1)
        pieces = [(e[i], e[i + 1], v1, v2) for i in range(k)]
        lens = [(len_u / k, len_v)] * k
    else:
        k = int(min(31, max(1, round(len_v / max(len_u, 1e-300)))))
        k += (k + 1) % 2
        e = np.linspace(v1, v2, k + 1)
        pieces = [(u1, u2, e[i], e[i + 1]) for i in range(k)]
        lens = [(len_u, len_v / k)] * k
    c = k // 2
    return pieces[c], [p for i, p in enumerate(pieces) if i != c], [l for i, l in enumerate(lens) if i != c]


def layer_matrices(mesh: BoundaryMesh, targets=None, normals=None, image: bool = False,
                   quad: BemQuadrature = BemQuadrature(), self_panels=None):
    """Single-layer matrix V and normal-derivative matrix K' (principal value,
    without the jump term) for targets against all panels.

    With ``targets`` omitted the targets are the panel centres and the
    self-panel entries use a Duffy rule. ``image`` integrates over the mirror
    image of the surface across z = 0 instead of the surface itself.
    """
    surf = mesh.surface
    if targets is None:
        targets, normals = mesh.centers, mesh.normals
        self_panels = np.arange(mesh.n_panels)
    x = np.atleast_2d(np.asarray(targets, dtype=float))
    M, P = x.shape[0], mesh.n_panels
    want_k = normals is not None

    ru, rv, rw = _tensor_rule(quad.far_order)
    u1 = mesh.u_edges[mesh.iu][:, None]
    u2 = mesh.u_edges[mesh.iu + 1][:, None]
    v1 = mesh.v_edges[mesh.iv][:, None]
    v2 = mesh.v_edges[mesh.iv + 1][:, None]
    U = u1 + (u2 - u1) * ru
    Vv = v1 + (v2 - v1) * rv
    Y = surf.point(U, Vv)
    W = surf.jacobian(U, Vv) * rw * ((u2 - u1) * (v2 - v1))
    C = mesh.centers
    if image:
        Y = reflect(Y)
        C = reflect(C)

    Vm = np.empty((M, P))
    Km = np.empty((M, P)) if want_k else None
    Yf = Y.reshape(-1, 3)
    Wf = W.reshape(-1)
    nq = ru.size
    block = max(1, int(2_000_000 // max(Yf.shape[0], 1)))
    for lo in range(0, M, block):
        xb = x[lo:lo + block]
        d = xb[:, None, :] - Yf[None]
        r2 = np.einsum("mqi,mqi->mq", d, d)
        inv = 1.0 / np.sqrt(r2)
        Vm[lo:lo + block] = (Wf * inv).reshape(-1, P, nq).sum(axis=-1) / FOUR_PI
        if want_k:
            dn = np.einsum("mqi,mi->mq", d, normals[lo:lo + block])
            Km[lo:lo + block] = -(Wf * dn * inv ** 3).reshape(-1, P, nq).sum(axis=-1) / FOUR_PI

    dist = np.linalg.norm(x[:, None, :] - C[None], axis=-1)
    near = dist < quad.near_factor * 2.0 * mesh.radius[None, :] + mesh.radius[None, :]
    if self_panels is not None and not image:
        near[np.arange(M), self_panels] = True
    # near pairs: regroup as quadrature items (target, panel, rectangle, rule)
    ii, jj = np.nonzero(near)
    if ii.size:
        Vm[ii, jj] = 0.0
        if want_k:
            Km[ii, jj] = 0.0
    chunk = 4096
    for lo in range(0, ii.size, chunk):
        _near_block(surf, mesh, x, normals, ii[lo:lo + chunk], jj[lo:lo + chunk], self_panels,
                    image, quad, Vm, Km)
    return Vm, Km


def _near_block(surf, mesh, x, normals, ii, jj, self_panels, image, quad, Vm, Km):
    items = []  # (target, panel, rect, rule or None, len_u, len_v)
    for i, j in zip(ii, jj):
        rect = mesh.rect(j)
        if self_panels is not None and not image and j == self_panels[i]:
            centre, others, olens = _self_pieces(rect, mesh.len_u[j], mesh.len_v[j])
            items.append((i, j, centre, _duffy_rule(quad.duffy_order), 0.0, 0.0))
            for rc, (lu, lv) in zip(others, olens):
                items.append((i, j, rc, None, lu, lv))
        else:
            items.append((i, j, rect, None, mesh.len_u[j], mesh.len_v[j]))

    # distance from each target to each pending rectangle via a 5 x 5 sample
    pend = [k for k, it in enumerate(items) if it[3] is None]
    if pend:
        g = np.linspace(0.0, 1.0, 5)
        su, sv = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
        R = np.array([items[k][2] for k in pend])
        U = R[:, :1] + (R[:, 1:2] - R[:, :1]) * su
        V = R[:, 2:3] + (R[:, 3:4] - R[:, 2:3]) * sv
        S = surf.point(U, V)
        if image:
            S = reflect(S)
        tgt = x[[items[k][0] for k in pend]]
        D = np.min(np.linalg.norm(S - tgt[:, None, :], axis=-1), axis=1)
        for k, d in zip(pend, D):
            i, j, rect, _, lu, lv = items[k]
            items[k] = (i, j, rect, _near_rule(rect, lu, lv, d, quad), lu, lv)

    us, vs, ws, tg, sizes = [], [], [], [], []
    for i, j, (u1, u2, v1, v2), (ru, rv, rw), _, _ in items:
        us.append(u1 + (u2 - u1) * ru)
        vs.append(v1 + (v2 - v1) * rv)
        ws.append(rw * (u2 - u1) * (v2 - v1))
        sizes.append(ru.size)
    u = np.concatenate(us)
    v = np.concatenate(vs)
    Y = surf.point(u, v)
    if image:
        Y = reflect(Y)
    w = np.concatenate(ws) * surf.jacobian(u, v)
    owner = np.repeat(np.array([it[0] for it in items]), sizes)
    d = x[owner] - Y
    r = np.sqrt(np.einsum("qi,qi->q", d, d))
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    ti = np.array([it[0] for it in items])
    tj = np.array([it[1] for it in items])
    np.add.at(Vm, (ti, tj), np.add.reduceat(w / r, starts) / FOUR_PI)
    if Km is not None:
        dn = np.einsum("qi,qi->q", d, normals[owner])
        np.add.at(Km, (ti, tj), -np.add.reduceat(w * dn / r ** 3, starts) / FOUR_PI)


# ---------------------------------------------------------------------------
# coupled system
# ---------------------------------------------------------------------------


@dataclass
class BemSystem:
    geom: VesselGeometry
    mesh: BoundaryMesh
    params: Params
    variant: str
    jump_sign: float
    V: np.ndarray
    Kp: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    stations: np.ndarray  # s of pressure unknowns: 0, cell centres, s_end
    face_a4: np.ndarray = field(repr=False)

    @property
    def n_panels(self) -> int:
        return self.mesh.n_panels

    def dn_operator(self) -> np.ndarray:
        """Matrix of the exterior normal derivative of q on the wall."""
        return 0.5 * self.jump_sign * np.eye(self.n_panels) + self.Kp


def normal_derivative_operator(mesh: BoundaryMesh, variant: str = "free-space", jump_sign: float = -1.0,
                               quad: BemQuadrature = BemQuadrature()):
    V, K = layer_matrices(mesh, quad=quad)
    if variant == "half-space":
        Vi, Ki = layer_matrices(mesh, mesh.centers, mesh.normals, image=True, quad=quad)
        V, K = V + Vi, K + Ki
    return V, 0.5 * jump_sign * np.eye(mesh.n_panels) + K


def assemble_bem(geom: VesselGeometry, mesh: BoundaryMesh, params: Params, variant: str = "half-space",
                 jump_sign: float = -1.0, quad: BemQuadrature = BemQuadrature()) -> BemSystem:
    """Unknowns [sigma (P), p_0, p_c1..p_cn, p_end].

    Robin rows (scaled by zeta eps):
        zeta eps dq/dn + kappa p_k - kappa q = 0 at each panel centre,
    flux rows per s-cell k:
        sum_ring dq/dn area + pi/(8 zeta mu) (phi_{k+1} - phi_k) = 0,
    closure rows p_0 = p0 and p_end = p_cn.
    """
    if mesh.mesh1d is None:
        raise ConfigError("vessel mesh must carry its 1D station mesh")
    P = mesh.n_panels
    n = mesh.n_u
    V, K = layer_matrices(mesh, quad=quad)
    if variant == "half-space":
        Vi, Ki = layer_matrices(mesh, mesh.centers, mesh.normals, image=True, quad=quad)
        V, K = V + Vi, K + Ki
    elif variant != "free-space":
        raise ConfigError(f"unknown kernel variant {variant!r}")
    dn = 0.5 * jump_sign * np.eye(P) + K

    s_edges = mesh.u_edges
    centres = 0.5 * (s_edges[1:] + s_edges[:-1])
    stations = np.concatenate([[0.0], centres, [s_edges[-1]]])
    # pressure-gradient faces at s_edges[0..n-1]; the tip face carries zero flux
    face_a4 = geom.a(s_edges[:-1]) ** 4
    gaps = np.diff(stations[:-1])  # c_k - c_{k-1} with c_0 = 0
    coef = face_a4 / gaps

    N = P + n + 2
    A = np.zeros((N, N))
    b = np.zeros(N)
    mu, kap, zeta, eps = params.mu, params.kappa, params.zeta, geom.eps
    A[:P, :P] = zeta * eps * dn - kap * V
    A[np.arange(P), P + 1 + mesh.iu] = kap

    pref = math.pi / (8.0 * zeta * mu)
    for k in range(n):
        row = P + k
        ring = mesh.iu == k
        A[row, :P] = mesh.areas[ring] @ dn[ring]
        # phi_k = coef[k] (p_{c_k} - p_{c_{k-1}}), unknown index P + k (+1 for centre)
        if k + 1 < n:
            A[row, P + k + 2] += pref * coef[k + 1]
            A[row, P + k + 1] -= pref * coef[k + 1]
        A[row, P + k + 1] -= pref * coef[k]
        A[row, P + k] += pref * coef[k]
    A[P + n, P] = 1.0
    b[P + n] = params.p0
    A[P + n + 1, P + n + 1] = 1.0
    A[P + n + 1, P + n] = -1.0
    return BemSystem(geom, mesh, params, variant, jump_sign, V, K, A, b, stations, face_a4)


@dataclass
class BemSolution:
    system: BemSystem
    sigma: np.ndarray
    p: np.ndarray  # at system.stations
    residual: float
    condition: float
    quad: BemQuadrature = BemQuadrature()

    @property
    def stations(self) -> np.ndarray:
        return self.system.stations

    def wall_q(self) -> np.ndarray:
        return self.system.V @ self.sigma

    def wall_dqdn(self) -> np.ndarray:
        return self.system.dn_operator() @ self.sigma

    def q(self, x) -> np.ndarray:
        """Single-layer pressure at exterior points (image included for the
        half-space variant)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mesh = self.system.mesh
        V, _ = layer_matrices(mesh, x, None, quad=self.quad, self_panels=None)
        if self.system.variant == "half-space":
            Vi, _ = layer_matrices(mesh, x, None, image=True, quad=self.quad)
            V = V + Vi
        return V @ self.sigma

    def pressure_at(self, s) -> np.ndarray:
        return np.interp(s, self.stations, self.p)

    def total_wall_flux(self) -> float:
        return float(self.system.mesh.areas @ self.wall_dqdn())

    def inlet_flux(self) -> float:
        """a^4 p' at s = 0 from the first pressure face."""
        st = self.stations
        return float(self.system.face_a4[0] * (self.p[1] - self.p[0]) / (st[1] - st[0]))

    def conservation_error(self) -> float:
        """Relative mismatch of total wall flux against pi/(8 zeta mu) a^4 p'(0)."""
        prm = self.system.params
        target = math.pi / (8.0 * prm.zeta * prm.mu) * self.inlet_flux()
        total = self.total_wall_flux()
        scale = max(abs(target), abs(total))
        return 0.0 if scale == 0 else abs(total - target) / scale

    def panels_to_csv(self, path) -> None:
        m = self.system.mesh
        q = self.wall_q()
        dq = self.wall_dqdn()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "theta", "sigma", "q", "dqdn"])
            for row in zip(m.uc, m.vc, self.sigma, q, dq):
                w.writerow([repr(float(v)) for v in row])

    def pressure_to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "p"])
            for row in zip(self.stations, self.p):
                w.writerow([repr(float(v)) for v in row])


def solve_bem(system: BemSystem, tol: float = 1e-8, max_condition: float = 1e14) -> BemSolution:
    A, b = system.matrix, system.rhs
    try:
        lu = scipy.linalg.lu_factor(A, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConditioningError(f"BEM factorization failed: {exc}") from exc
    if np.min(np.abs(np.diag(lu[0]))) == 0.0:
        raise ConditioningError("BEM matrix is singular")
    x = scipy.linalg.lu_solve(lu, b)
    cond = float(np.linalg.cond(A, 1))
    if not np.isfinite(cond) or cond > max_condition:
        raise ConditioningError(f"BEM matrix numerically singular (cond {cond:.2e})")
    r = A @ x - b
    # row-relative residual against the magnitude of each row's terms
    scale = np.abs(A) @ np.abs(x) + np.abs(b)
    rel = np.abs(r) / np.where(scale > 0, scale, 1.0)
    res = float(np.max(rel))
    if res > tol:
        raise ConvergenceError(f"BEM residual {res:.3e} exceeds {tol:g}")
    P = system.n_panels
    return BemSolution(system, x[:P], x[P:], res, cond)


def solve_3d1d(geom: VesselGeometry, params: Params, n_s: int = 40, n_theta: int = 16,
               h_min: float | None = None, variant: str = "half-space",
               quad: BemQuadrature = BemQuadrature()) -> BemSolution:
    mesh = build_boundary_mesh(geom, n_s, n_theta, h_min)
    sol = solve_bem(assemble_bem(geom, mesh, params, variant, quad=quad))
    sol.quad = quad
    return sol


# ---------------------------------------------------------------------------
# comparison with the 1D model
# ---------------------------------------------------------------------------


def default_probes(geom: VesselGeometry, count: int = 10) -> np.ndarray:
    """Fixed exterior probe points at moderate distance from the vessel."""
    s = np.linspace(0.15, 0.85, count)
    th = 2.0 * np.pi * np.arange(count) / count * 0.61803398875
    r = np.maximum(0.25 + 0.1 * np.sin(np.arange(count)), 3.0 * geom.eps)
    return point(geom, r, th, s)


def compare_to_1d(bem: BemSolution, sol: Solution1D, probes=None, fd_step: float = 1e-3, ctx=None) -> dict:
    """Errors between the 3D-1D solution and the 1D model on shared stations.

    The gradient entry is a probe-set proxy for the exterior energy norm,
    not that norm itself.
    """
    from .fields import exterior_pressure
    from .greens import KernelContext

    mesh = bem.system.mesh
    if mesh.mesh1d is None or mesh.mesh1d.nodes.shape != sol.s.shape or not np.allclose(
            mesh.mesh1d.nodes, sol.s, rtol=0, atol=1e-14):
        raise ConfigError("3D-1D and 1D solutions are not built on matching stations")
    ctx = ctx or KernelContext(variant=bem.system.variant)
    geom = bem.system.geom

    p_b = bem.pressure_at(sol.s)
    diff = p_b - sol.p
    ha = ha_norm_values(sol.s, diff, sol.face_a4)

    p_sb_panel = np.interp(mesh.uc, sol.s, sol.p)
    p_panel = bem.p[1 + mesh.iu]
    q_sb = exterior_pressure(ctx, geom, sol, mesh.centers)
    q = bem.wall_q()
    surf = float(np.sqrt(np.sum(((p_sb_panel - p_panel) - (q_sb - q)) ** 2 * mesh.areas)))

    probes = default_probes(geom) if probes is None else np.atleast_2d(probes)
    g_b = np.zeros((probes.shape[0], 3))
    g_s = np.zeros((probes.shape[0], 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = fd_step
        g_b[:, k] = (bem.q(probes + e) - bem.q(probes - e)) / (2 * fd_step)
        g_s[:, k] = (exterior_pressure(ctx, geom, sol, probes + e)
                     - exterior_pressure(ctx, geom, sol, probes - e)) / (2 * fd_step)
    grad = float(np.sqrt(np.mean(np.sum((g_b - g_s) ** 2, axis=1))))
    return {
        "ha_error": float(ha),
        "surface_l2_error": surf,
        "gradient_probe_rms": grad,
        "gradient_probe_is_proxy": True,
        "n_probes": int(probes.shape[0]),
    }


def self_convergence(geom: VesselGeometry, params: Params, levels, probes=None, h_min: float | None = None,
                     variant: str = "half-space", quad: BemQuadrature = BemQuadrature()) -> dict:
    """Probe values on three (n_s, n_theta) levels; errors against the finest.

    For error ~ h^k the ratio e0 / e1 equals 2^k + 1, so the observed order
    is log2(e0 / e1 - 1).
    """
    if len(levels) != 3:
        raise ConfigError("self-convergence needs three levels")
    probes = default_probes(geom) if probes is None else probes
    vals = []
    for n_s, n_t in levels:
        sol = solve_3d1d(geom, params, n_s, n_t, h_min, variant, quad)
        vals.append(sol.q(probes))
    e0 = float(np.max(np.abs(vals[0] - vals[2])))
    e1 = float(np.max(np.abs(vals[1] - vals[2])))
    ratio = e0 / e1 if e1 > 0 else math.inf
    order = math.log2(ratio - 1.0) if ratio > 1 else -math.inf
    return {"values": [v.tolist() for v in vals], "e0": e0, "e1": e1, "ratio": ratio, "order": order}


def reciprocity_asymmetry(mesh: BoundaryMesh, quad: BemQuadrature = BemQuadrature()) -> float:
    """Relative off-diagonal asymmetry of A_i V_ij.

    Both A_i V_ij and A_j V_ji approximate the double integral of G over
    panels i and j, so their mismatch measures quadrature error only.
    """
    V, _ = layer_matrices(mesh, quad=quad)
    S = V * mesh.areas[:, None]
    off = ~np.eye(S.shape[0], dtype=bool)
    return float(np.linalg.norm((S - S.T)[off]) / np.linalg.norm(S[off]))
