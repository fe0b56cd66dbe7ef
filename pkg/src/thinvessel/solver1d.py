"""Slender-body 1D model: a degenerate second-order equation for the interior
pressure coupled to the ring-averaged line operator.

Unknowns are nodal pressures p_i and nodal flux densities F_i = (a^4 p')'.
The flux link uses a conservative finite-volume stencil with a^4 taken at
face midpoints, the tip face carries zero flux, and the pressure is fixed
at the wall end.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ConditioningError, ConvergenceError, DomainError
from .geometry import VesselGeometry
from .greens import KernelContext, LineDensity, ring_average_matrix


@dataclass(frozen=True)
class Params:
    mu: float = 1.0
    kappa: float = 1.0
    zeta: float = 1.0
    p0: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.zeta > 0 and self.kappa >= 0):
            raise ValueError("need mu > 0, zeta > 0, kappa >= 0")

    def to_dict(self):
        return {"mu": self.mu, "kappa": self.kappa, "zeta": self.zeta, "p0": self.p0}


@dataclass(frozen=True)
class Mesh1D:
    """Nodes s_0 = 0 < ... < s_N = 1 - h_min, graded so spacing ~ sqrt(1 - s)."""

    nodes: np.ndarray
    h_min: float
    grading: float = 2.0

    @classmethod
    def graded(cls, n: int, h_min: float, grading: float = 2.0) -> "Mesh1D":
        if n < 2:
            raise ValueError("mesh needs at least two intervals")
        if not 0.0 <= h_min < 1.0:
            raise ValueError("h_min must lie in [0, 1)")
        xi = np.linspace(0.0, 1.0, n + 1)
        s = 1.0 - h_min - (1.0 - h_min) * (1.0 - xi) ** grading
        s[0] = 0.0
        return cls(s, float(h_min), float(grading))

    @property
    def n(self) -> int:
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def control_volumes(self) -> np.ndarray:
        h = self.widths
        v = np.zeros(self.nodes.size)
        v[:-1] += 0.5 * h
        v[1:] += 0.5 * h
        return v


@dataclass
class LinearSystem1D:
    geom: VesselGeometry
    ctx: KernelContext
    mesh: Mesh1D
    params: Params
    matrix: np.ndarray
    rhs: np.ndarray
    ring_matrix: np.ndarray
    face_a4: np.ndarray


@dataclass(frozen=True)
class Solution1D:
    geom: VesselGeometry
    ctx: KernelContext
    mesh: Mesh1D
    params: Params
    p: np.ndarray
    F: np.ndarray
    residual: float
    condition: float
    face_a4: np.ndarray = field(repr=False)

    @property
    def s(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def a(self) -> np.ndarray:
        return self.geom.a(self.s)

    def face_flux(self) -> np.ndarray:
        """a^4 p' at the N internal faces plus the zero tip face (length N + 1)."""
        h = self.mesh.widths
        phi = self.face_a4 * np.diff(self.p) / h
        return np.append(phi, 0.0)

    def inlet_flux(self) -> float:
        """a^4 p' at s = 0 from the discrete balance of the first half cell."""
        return float(self.face_flux()[0] - 0.5 * self.mesh.widths[0] * self.F[0])

    def nodal_flux(self) -> np.ndarray:
        """a^4 p' at the nodes: inlet value, face averages inside, zero at the tip."""
        ff = self.face_flux()
        out = np.empty(self.s.size)
        out[0] = self.inlet_flux()
        out[1:] = 0.5 * (ff[:-1] + ff[1:])
        out[-1] = 0.5 * ff[-2]
        return out

    def dp(self) -> np.ndarray:
        return self.nodal_flux() / self.a ** 4

    def d2p(self) -> np.ndarray:
        a = self.a
        da = self.geom.da(self.s)
        return (self.F - 4.0 * a ** 3 * da * self.dp()) / a ** 4

    def density(self) -> LineDensity:
        """F as a line density on [0, 1], vanishing at t = 1 where a(1) = 0."""
        return LineDensity(np.append(self.s, 1.0), np.append(self.F, 0.0))

    def ha_norm(self) -> float:
        return ha_norm_values(self.s, self.p, self.face_a4)

    def flux_balance(self) -> float:
        """Trapezoid integral of F plus inlet flux minus last-face flux."""
        ff = self.face_flux()
        integral = float(np.sum(0.5 * self.mesh.widths * (self.F[:-1] + self.F[1:])))
        return integral + self.inlet_flux() - ff[-1]

    def to_csv(self, path) -> None:
        path = Path(path)
        flux = self.nodal_flux()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "a", "p", "F", "a4dp"])
            for row in zip(self.s, self.a, self.p, self.F, flux):
                w.writerow([repr(float(v)) for v in row])

    def summary(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "eps": self.geom.eps,
            "n": self.mesh.n,
            "h_min": self.mesh.h_min,
            "residual": self.residual,
            "condition": self.condition,
            "ha_norm": self.ha_norm(),
            "inlet_flux": self.inlet_flux(),
            "flux_balance": self.flux_balance(),
        }

    def write_sidecar(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2))


def ha_norm_values(s, p, face_a4=None, a=None) -> float:
    """sqrt(||p||^2 + ||a^2 p'||^2): trapezoid rule for p, face midpoints for a^2 p'.

    A grid ending short of s = 1 is closed by holding p at its last value on
    the tip segment, consistent with the zero tip flux.
    """
    s = np.asarray(s, dtype=float)
    p = np.asarray(p, dtype=float)
    h = np.diff(s)
    if face_a4 is None:
        face_a4 = a(0.5 * (s[1:] + s[:-1])) ** 4
    l2 = np.sum(0.5 * h * (p[1:] ** 2 + p[:-1] ** 2)) + max(1.0 - s[-1], 0.0) * p[-1] ** 2
    dp = np.diff(p) / h
    d2 = np.sum(h * face_a4 * dp ** 2)
    return math.sqrt(l2 + d2)


def face_coefficients(geom: VesselGeometry, mesh: Mesh1D) -> np.ndarray:
    return geom.a(mesh.midpoints) ** 4


def assemble_system(geom: VesselGeometry, ctx: KernelContext, mesh: Mesh1D, params: Params,
                    ring_matrix: np.ndarray | None = None) -> LinearSystem1D:
    """Block system for [p_0..p_N, F_0..F_N].

    Row 0 fixes p_0. Rows 1..N balance each control volume:
    V_i F_i = phi_{i+1/2} - phi_{i-1/2} with phi_{N+1/2} = 0. Rows N+1..2N+1
    are the collocated integral relation
    F_i - 16 mu kappa a_i p_i + (kappa / zeta) a_i sum_j M_ij F_j = 0,
    M being the ring-integrated line operator.
    """
    if mesh.h_min <= 0 or mesh.nodes[-1] >= 1.0:
        raise DomainError("the solver mesh must stop short of the tip")
    s = mesh.nodes
    n1 = s.size
    a = geom.a(s)
    h = mesh.widths
    face = face_coefficients(geom, mesh)
    vol = mesh.control_volumes()

    if ring_matrix is None:
        if params.kappa == 0.0:
            ring_matrix = np.zeros((n1, n1 + 1))
        else:
            ring_matrix = ring_average_matrix(ctx, geom, np.append(s, 1.0), s)
    M = ring_matrix[:, :n1]  # the t = 1 column multiplies F(1) = 0

    A = np.zeros((2 * n1, 2 * n1))
    b = np.zeros(2 * n1)
    A[0, 0] = 1.0
    b[0] = params.p0
    c = face / h
    for i in range(1, n1):
        r = i
        A[r, n1 + i] = vol[i]
        # -(phi_{i+1/2} - phi_{i-1/2})
        if i < n1 - 1:
            A[r, i + 1] -= c[i]
            A[r, i] += c[i]
        A[r, i] += c[i - 1]
        A[r, i - 1] -= c[i - 1]
    rows = slice(n1, 2 * n1)
    A[rows, n1:] = np.eye(n1) + (params.kappa / params.zeta) * a[:, None] * M
    A[rows, :n1] = np.diag(-16.0 * params.mu * params.kappa * a)
    return LinearSystem1D(geom, ctx, mesh, params, A, b, ring_matrix, face)


def solve_pressure(system: LinearSystem1D, tol: float = 1e-10, max_condition: float = 1e14) -> Solution1D:
    A, b = system.matrix, system.rhs
    cond = float(np.linalg.cond(A, 1))
    if not np.isfinite(cond) or cond > max_condition:
        raise ConditioningError(
            f"1D system numerically singular (cond {cond:.2e}, N = {system.mesh.n}, eps = {system.geom.eps})")
    lu = scipy.linalg.lu_factor(A)
    x = scipy.linalg.lu_solve(lu, b)
    res = float(np.max(np.abs(A @ x - b)))
    scale = abs(system.params.p0)
    if res > tol * max(scale, 1e-300) and not (scale == 0.0 and res == 0.0):
        raise ConvergenceError(f"1D residual {res:.3e} exceeds {tol:g} |p0|")
    n1 = system.mesh.nodes.size
    return Solution1D(system.geom, system.ctx, system.mesh, system.params, x[:n1], x[n1:],
                      res, cond, system.face_a4)


def solve_1d(geom: VesselGeometry, params: Params, n: int = 256, ctx: KernelContext | None = None,
             h_min: float | None = None) -> Solution1D:
    ctx = ctx or KernelContext()
    mesh = Mesh1D.graded(n, geom.eps ** 2 if h_min is None else h_min)
    return solve_pressure(assemble_system(geom, ctx, mesh, params))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


RATIO_NAMES = ("p_l2", "a2dp_l2", "p_linf", "adp_linf", "a3d2p_linf")


def check_apriori_bounds(sol: Solution1D) -> dict[str, float]:
    """Norm ratios of the solution relative to |p0| with eps^(1/2) weights on
    the sup norms."""
    p0 = abs(sol.params.p0)
    if p0 == 0:
        raise DomainError("ratios undefined for p0 = 0")
    s, p, a = sol.s, sol.p, sol.a
    h = sol.mesh.widths
    re = math.sqrt(sol.geom.eps)
    l2 = math.sqrt(np.sum(0.5 * h * (p[1:] ** 2 + p[:-1] ** 2)) + (1.0 - s[-1]) * p[-1] ** 2)
    d2 = math.sqrt(np.sum(h * sol.face_a4 * (np.diff(p) / h) ** 2))
    flux = sol.nodal_flux()
    adp = flux / a ** 3
    a3d2p = a ** 3 * sol.d2p()
    return {
        "p_l2": l2 / p0,
        "a2dp_l2": d2 / p0,
        "p_linf": re * float(np.max(np.abs(p))) / p0,
        "adp_linf": re * float(np.max(np.abs(adp))) / p0,
        "a3d2p_linf": re * float(np.max(np.abs(a3d2p))) / p0,
    }


def ratio_spread(reports: list[dict[str, float]]) -> dict[str, float]:
    """max / min of each ratio across a sweep (inf when a ratio hits zero)."""
    out = {}
    for k in RATIO_NAMES:
        v = np.array([r[k] for r in reports])
        out[k] = float(v.max() / v.min()) if v.min() > 0 else (1.0 if v.max() == 0 else math.inf)
    return out


def richardson_order(values) -> float:
    """Observed order from three values on meshes refined by two each time."""
    v0, v1, v2 = values
    return math.log2(abs(v0 - v1) / abs(v1 - v2))


def poincare_ratio(s, u, a) -> float:
    """||u|| / ||a^2 u'|| on a grid, trapezoid and face-midpoint rules."""
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    h = np.diff(s)
    num = math.sqrt(np.sum(0.5 * h * (u[1:] ** 2 + u[:-1] ** 2)))
    den = math.sqrt(np.sum(h * a(0.5 * (s[1:] + s[:-1])) ** 4 * (np.diff(u) / h) ** 2))
    return num / den


def random_poincare_functions(rng: np.random.Generator, s, count: int = 100, modes: int = 6):
    """Random smooth functions vanishing at s = 0: sine series plus a power term."""
    s = np.asarray(s, dtype=float)
    out = []
    for _ in range(count):
        c = rng.normal(size=modes) / (1.0 + np.arange(modes))
        k = (np.arange(modes) + 0.5) * np.pi
        u = np.sin(np.outer(s, k)) @ c
        u += rng.normal() * s ** rng.uniform(0.6, 3.0)
        out.append(u)
    return out
