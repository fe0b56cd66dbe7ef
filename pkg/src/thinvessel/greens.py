"""Neumann Green's function of the half space and the slender-body line operator.

The line operator integrates the kernel against a density f(t), t in [0, 1],
placed at X(L t) with L = sqrt(1 - eps^2). Densities are piecewise linear
between their nodes, so every evaluation reduces to a weight vector
``w`` with ``S[f](x) = w @ f.values``. Weights come from composite
Gauss-Legendre rules on the density panels, refined geometrically around the
projection of each target onto the centerline, with the tangent-line kernel
subtracted and added back analytically for targets close to the curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, SingularityError
from .geometry import VesselGeometry, is_interior, point

FOUR_PI = 4.0 * math.pi
VARIANTS = ("half-space", "free-space")


@dataclass(frozen=True)
class KernelContext:
    """Kernel variant plus quadrature controls.

    ``proximity_factor`` switches on singularity subtraction when the distance
    to the centerline is below ``proximity_factor * eps * a(s)`` at the
    projection point. ``n_theta`` is the trapezoid resolution of ring averages.
    """

    variant: str = "half-space"
    proximity_factor: float = 3.0
    order_regular: int = 8
    order_singular: int = 12
    n_theta: int = 32

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"kernel variant must be one of {VARIANTS}")
        if self.order_regular < 2 or self.order_singular < 2 or self.n_theta < 4:
            raise ValueError("quadrature orders too small")

    @property
    def image(self) -> bool:
        return self.variant == "half-space"


@dataclass(frozen=True)
class LineDensity:
    """Nodal values of a density on a strictly increasing t-grid in [0, 1]."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 2 or t.shape != v.shape:
            raise ValueError("density needs at least two nodes with matching values")
        if np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > 1:
            raise ValueError("density nodes must increase strictly inside [0, 1]")
        object.__setattr__(self, "nodes", t)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        return np.interp(t, self.nodes, self.values)

    def scaled(self, alpha: float) -> "LineDensity":
        return LineDensity(self.nodes, alpha * self.values)


def reflect(x):
    """Mirror image across the wall z = 0."""
    y = np.array(x, dtype=float, copy=True)
    y[..., 2] = -y[..., 2]
    return y


def eval_green(ctx: KernelContext, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.linalg.norm(x - y, axis=-1)
    if np.any(d == 0):
        raise SingularityError("Green's function evaluated at coincident points")
    g = 1.0 / d
    if ctx.image:
        di = np.linalg.norm(x - reflect(y), axis=-1)
        if np.any(di == 0):
            raise SingularityError("Green's function evaluated at an image point")
        g = g + 1.0 / di
    return g / FOUR_PI


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


# ---------------------------------------------------------------------------
# weight construction
# ---------------------------------------------------------------------------


class _Curve:
    """The pulled-back centerline c(t) = X(L t)."""

    def __init__(self, geom: VesselGeometry):
        self.geom = geom
        self.L = math.sqrt(1.0 - geom.eps ** 2)

    def pos(self, t):
        return self.geom.centerline.position(self.L * np.asarray(t))

    def d1(self, t):
        return self.L * self.geom.centerline.tangent(self.L * np.asarray(t))

    def d2(self, t):
        return self.L ** 2 * self.geom.centerline.second_derivative(self.L * np.asarray(t))

    def project(self, x, n_seed: int = 257):
        """Closest parameter t* in [0, 1] and distance for each target row."""
        x = np.atleast_2d(x)
        seeds = np.linspace(0.0, 1.0, n_seed)
        cs = self.pos(seeds)
        d2 = np.sum((x[:, None, :] - cs[None]) ** 2, axis=-1)
        t = seeds[np.argmin(d2, axis=1)]
        for _ in range(40):
            r = self.pos(t) - x
            c1 = self.d1(t)
            g = np.sum(r * c1, axis=-1)
            dg = np.sum(c1 * c1, axis=-1) + np.sum(r * self.d2(t), axis=-1)
            step = g / np.where(dg > 1e-14, dg, 1.0)
            tn = np.clip(t - step, 0.0, 1.0)
            done = np.max(np.abs(tn - t)) < 1e-15
            t = tn
            if done:
                break
        return t, np.linalg.norm(x - self.pos(t), axis=-1)


def _panel_rule(nodes, order):
    gx, gw = _gauss(order)
    h = np.diff(nodes)
    tq = (nodes[:-1, None] + 0.5 * h[:, None] * (gx[None] + 1.0)).ravel()
    wq = (0.5 * h[:, None] * gw[None]).ravel()
    panel = np.repeat(np.arange(h.size), order)
    return tq, wq, panel


def _local_rule(nodes, t_star, d_t, order_reg, order_sing):
    """Quadrature (t, w, panel index) on [0, 1] refined around t_star.

    Panels within four local widths of t_star are split at
    t_star +/- d_t 2^k, k = -3, -2, ..., so each piece sits at least its own
    length from the near-singularity; the remaining panels use the plain rule.
    Targets farther than two local widths need no refinement.
    """
    h = np.diff(nodes)
    j = int(np.clip(np.searchsorted(nodes, t_star, side="right") - 1, 0, h.size - 1))
    h_loc = h[max(j - 1, 0):j + 2].max()
    if d_t >= 2.0 * h_loc:
        return _panel_rule(nodes, order_reg)
    reach = 4.0 * h_loc
    near = (nodes[1:] > t_star - reach) & (nodes[:-1] < t_star + reach)
    idx = np.flatnonzero(near)
    p0, p1 = idx[0], idx[-1] + 1

    offs = d_t * 2.0 ** np.arange(-3, 64)
    offs = offs[offs <= reach]
    cuts = np.concatenate([[t_star], t_star - offs, t_star + offs])
    lo, hi = nodes[p0], nodes[p1]
    bp = np.unique(np.concatenate([nodes[p0:p1 + 1], cuts[(cuts > lo) & (cuts < hi)]]))
    keep = np.concatenate([[True], np.diff(bp) > 1e-15])
    bp = bp[keep]
    bp[-1] = hi
    ha, hb = bp[:-1], bp[1:]
    pan_near = np.searchsorted(nodes, 0.5 * (ha + hb), side="right") - 1

    gx, gw = _gauss(order_sing)
    tn = (ha[:, None] + 0.5 * (hb - ha)[:, None] * (gx + 1.0)).ravel()
    wn = (0.5 * (hb - ha)[:, None] * gw).ravel()
    pn = np.repeat(pan_near, order_sing)

    far = np.flatnonzero(~near)
    gx, gw = _gauss(order_reg)
    a, b = nodes[far], nodes[far + 1]
    tf = (a[:, None] + 0.5 * (b - a)[:, None] * (gx + 1.0)).ravel()
    wf = (0.5 * (b - a)[:, None] * gw).ravel()
    pf = np.repeat(far, order_reg)
    return np.concatenate([tf, tn]), np.concatenate([wf, wn]), np.concatenate([pf, pn])


def _hat_accumulate(nodes, tq, panel, values, n_out):
    """Distribute per-point quadrature contributions onto hat functions.

    ``values`` has shape (m, q); returns (m, n_nodes).
    """
    h = np.diff(nodes)
    lam = (tq - nodes[panel]) / h[panel]
    out = np.zeros((values.shape[0], n_out))
    left = values * (1.0 - lam)
    right = values * lam
    for m in range(values.shape[0]):
        out[m] += np.bincount(panel, weights=left[m], minlength=n_out)
        out[m, 1:] += np.bincount(panel, weights=right[m], minlength=n_out - 1)[: n_out - 1]
    return out


def _subtraction_weights(nodes, t0, A, B, x):
    Bn = np.linalg.norm(B)
    u = B / Bn
    rel = x - A
    tau = t0 + (rel @ u) / Bn
    delta = np.sqrt(np.maximum(np.sum(rel * rel, axis=-1) - (rel @ u) ** 2, 0.0))
    if np.any(delta <= 0):
        raise SingularityError("target lies on the tangent line of the centerline")
    t1 = nodes[:-1][None, :]
    t2 = nodes[1:][None, :]
    tc = tau[:, None]
    dl = (delta / Bn)[:, None]
    I0 = (np.arcsinh((t2 - tc) / dl) - np.arcsinh((t1 - tc) / dl)) / Bn
    R2 = np.sqrt((t2 - tc) ** 2 + dl ** 2)
    R1 = np.sqrt((t1 - tc) ** 2 + dl ** 2)
    I1 = (R2 - R1) / Bn + (tc - t1) * I0
    h = (t2 - t1)
    w = np.zeros((x.shape[0], nodes.size))
    w[:, :-1] += I0 - I1 / h
    w[:, 1:] += I1 / h
    return w, tau, delta


def _direct_weights(curve: _Curve, ctx: KernelContext, nodes, x, t_star, d,
                    subtract: bool, collapse: bool = False):
    """Weights of the free-space part 1/(4 pi |x - c(t)|) for targets x sharing
    one projection (t_star, d). ``collapse`` sums the rows over targets."""
    c1 = curve.d1(np.array(t_star))
    d_t = max(d / np.linalg.norm(c1), 1e-14)
    tq, wq, pan = _local_rule(nodes, t_star, d_t, ctx.order_regular, ctx.order_singular)
    cq = curve.pos(tq)
    r = _dist(x[:, None, :] - cq[None])
    if np.any(r == 0):
        raise SingularityError("target on the centerline")
    K = 1.0 / r
    if subtract:
        A = curve.pos(np.array(t_star))
        lin = A[None, None, :] + (tq - t_star)[None, :, None] * c1[None, None, :]
        K = K - 1.0 / _dist(x[:, None, :] - lin)
        w_an, _, _ = _subtraction_weights(nodes, t_star, A, c1, x)
    if collapse:
        K = K.sum(axis=0, keepdims=True)
    W = _hat_accumulate(nodes, tq, pan, K * wq[None], nodes.size)
    if subtract:
        W = W + (w_an.sum(axis=0, keepdims=True) if collapse else w_an)
    return W / FOUR_PI


def _dist(v):
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def _free_weights(curve, ctx, nodes, x, check_subtract=True):
    """Per-target free-space weights, each target with its own projection."""
    x = np.atleast_2d(x)
    t_star, d = curve.project(x)
    W = np.empty((x.shape[0], nodes.size))
    eps = curve.geom.eps
    for m in range(x.shape[0]):
        s_proj = curve.L * t_star[m]
        near = d[m] < ctx.proximity_factor * eps * float(curve.geom.a(s_proj))
        sub = check_subtract and near and 0.0 < t_star[m] < 1.0
        W[m] = _direct_weights(curve, ctx, nodes, x[m:m + 1], t_star[m], d[m], sub)[0]
    return W


def sn_weights(ctx: KernelContext, geom: VesselGeometry, nodes, x, check_domain: bool = True):
    """Weight matrix W with S_N[f](x_m) = W[m] @ f.values for densities on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if check_domain:
        if np.any(x[:, 2] < 0):
            raise DomainError("target below the wall z = 0")
        if np.any(is_interior(geom, x, rel_tol=1e-6)):
            raise DomainError("target strictly inside the vessel")
    curve = _Curve(geom)
    W = _free_weights(curve, ctx, nodes, x)
    if ctx.image:
        W = W + _free_weights(curve, ctx, nodes, reflect(x), check_subtract=False)
    return W


def sn_apply(ctx: KernelContext, geom: VesselGeometry, f: LineDensity, x):
    """Slender-body operator S_N[f] at one or many targets."""
    x = np.asarray(x, dtype=float)
    W = sn_weights(ctx, geom, f.nodes, x.reshape(-1, 3))
    out = W @ f.values
    return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])


def ring_weights(ctx: KernelContext, geom: VesselGeometry, nodes, s: float, n_theta: int | None = None,
                 collapse: bool = False):
    """Weights for the targets on the surface ring at station s.

    Returns (n_theta, n_nodes), or the row sum (1, n_nodes) with ``collapse``. All ring points share the projection
    t* = s / L and the distance eps a(s), hence one refined rule.
    """
    nodes = np.asarray(nodes, dtype=float)
    n_theta = n_theta or ctx.n_theta
    curve = _Curve(geom)
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    x = point(geom, geom.eps * geom.a(s), th, np.full(n_theta, s))
    t_star = min(s / curve.L, 1.0)
    d = float(geom.eps * geom.a(s))
    if d <= 0:
        raise DomainError("ring radius vanishes at the tip")
    sub = 0.0 < t_star < 1.0
    W = _direct_weights(curve, ctx, nodes, x, t_star, d, sub, collapse)
    if ctx.image:
        xi = reflect(x)
        ti, di = curve.project(xi)
        k = int(np.argmin(di))
        W = W + _direct_weights(curve, ctx, nodes, xi, float(ti[k]), float(di[k]), False, collapse)
    return W


def ring_average_matrix(ctx: KernelContext, geom: VesselGeometry, nodes, stations,
                        n_theta: int | None = None):
    """Matrix M with (M @ f)[i] = integral over theta of S_N[f] on the ring at stations[i]."""
    n_theta = n_theta or ctx.n_theta
    M = np.empty((len(stations), len(nodes)))
    for i, s in enumerate(stations):
        M[i] = ring_weights(ctx, geom, nodes, float(s), n_theta, collapse=True)[0] * (2.0 * np.pi / n_theta)
    return M


def sn_surface_average(ctx: KernelContext, geom: VesselGeometry, f: LineDensity, s: float,
                       n_theta: int | None = None) -> float:
    """Integral over theta in [0, 2 pi) of S_N[f] on the surface ring at s."""
    if not 0.0 <= s < 1.0:
        raise DomainError("ring average requires 0 <= s < 1")
    return float(ring_average_matrix(ctx, geom, f.nodes, [s], n_theta)[0] @ f.values)


def straight_line_potential(rho, z, length):
    """Closed form of the integral over tau in [0, length] of 1/|x - tau e_z| for
    x = (rho, 0, z), rho > 0."""
    return np.arcsinh((length - z) / rho) + np.arcsinh(z / rho)
