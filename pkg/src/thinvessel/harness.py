"""Reproducible runs: single solves, epsilon sweeps and the property suite."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bem3d1d import (
    assemble_bem,
    build_boundary_mesh,
    compare_to_1d,
    normal_derivative_operator,
    solve_bem,
    sphere_mesh,
)
from .config import RunConfig, RunReport
from .errors import ConfigError, GeometryValidationError
from .fields import (
    VelocityAnsatz,
    box_points,
    far_field_ratio,
    fd_divergence,
    plateau_nodes,
    sample_fields,
    surface_pressure,
    theta_variation,
)
from .geometry import VesselGeometry, point, validate_admissible
from .greens import KernelContext, LineDensity, eval_green, sn_apply, straight_line_potential
from .solver1d import (
    Mesh1D,
    Params,
    Solution1D,
    assemble_system,
    check_apriori_bounds,
    poincare_ratio,
    random_poincare_functions,
    ratio_spread,
    solve_pressure,
)

POINCARE_CONSTANT = 2.05
SPREAD_LIMIT = 2.0


def _validated_geometry(cfg: RunConfig, eps: float | None = None, centerline: dict | None = None):
    geom = cfg.geometry(eps, centerline)
    rep = validate_admissible(geom)
    if not rep.passed:
        names = ", ".join(c.name for c in rep.failures())
        raise GeometryValidationError(f"geometry not admissible: {names}")
    return geom, rep


def _solve_on(cfg: RunConfig, geom: VesselGeometry, n: int) -> Solution1D:
    mesh = Mesh1D.graded(n, cfg.h_min(geom.eps))
    system = assemble_system(geom, cfg.kernel(), mesh, cfg.params())
    return solve_pressure(system, tol=cfg.data["numerics"]["residual_1d"])


def _is_straight(geom: VesselGeometry) -> bool:
    return geom.kappa_star == 0.0


def loglog_slopes(eps, values) -> dict:
    """Least-squares slopes of log(value) and log(value / |log eps|) in log eps."""
    e = np.asarray(eps, dtype=float)
    v = np.asarray(values, dtype=float)
    if e.size < 3:
        raise ConfigError("a slope fit needs at least three epsilon values")
    if np.any(v <= 0):
        return {"slope": math.nan, "slope_log_corrected": math.nan}
    x = np.log(e)
    plain = np.polyfit(x, np.log(v), 1)[0]
    corr = np.polyfit(x, np.log(v / np.abs(np.log(e))), 1)[0]
    return {"slope": float(plain), "slope_log_corrected": float(corr)}


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# ---------------------------------------------------------------------------
# solve-1d
# ---------------------------------------------------------------------------


def cmd_solve_1d(cfg: RunConfig, out: Path) -> RunReport:
    rep = RunReport("solve-1d", cfg)
    nm = cfg.data["numerics"]
    with rep.timed("geometry"):
        geom, grep = _validated_geometry(cfg)
    rep.results["geometry"] = grep.to_dict()
    with rep.timed("solve"):
        sol = _solve_on(cfg, geom, int(nm["n_1d"]))
    rep.results["solution"] = sol.summary()
    rep.check("residual_1d", sol.residual, f"<= {nm['residual_1d']:g}", sol.residual <= nm["residual_1d"])
    fb = abs(sol.flux_balance())
    rep.check("flux_balance", fb, f"<= {nm['flux_balance_tol']:g}", fb <= nm["flux_balance_tol"])

    ctx = cfg.kernel()
    with rep.timed("diagnostics"):
        diag: dict = {}
        if sol.params.p0 != 0:
            diag["apriori_ratios"] = check_apriori_bounds(sol)
        if np.any(sol.F != 0):
            tv = theta_variation(ctx, geom, sol)
            diag["theta_variation_surface"] = tv.surface
            diag["far_field_ratio"] = far_field_ratio(ctx, geom, sol)
        else:
            diag["theta_variation_surface"] = 0.0
        if sol.params.kappa == 0:
            dev = float(np.max(np.abs(sol.p - sol.params.p0)))
            fmax = float(np.max(np.abs(sol.F)))
            rep.check("kappa_zero_constant_pressure", dev, "<= 1e-12", dev <= 1e-12)
            rep.check("kappa_zero_zero_flux", fmax, "<= 1e-12", fmax <= 1e-12)
        if _is_straight(geom):
            ans = VelocityAnsatz(geom, sol)
            s_pl = plateau_nodes(sol, ans.cutoff)
            s_pl = s_pl[s_pl > 0]
            th = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
            S, T = np.meshgrid(s_pl, th, indexing="ij")
            div = np.max(np.abs(ans.divergence(0.5 * geom.eps * geom.a(S), T, S)))
            rep.check("straight_divergence_free", div, "<= 1e-10", div <= 1e-10)
            wf = _wall_flux_defect(geom, sol, ans)
            rep.check("straight_wall_flux_identity", wf, "<= 1e-10", wf <= 1e-10)
        rep.results["diagnostics"] = diag

    out.mkdir(parents=True, exist_ok=True)
    sol.to_csv(out / "solution.csv")
    sol.write_sidecar(out / "solution.json")
    rep.write(out)
    return rep


def _wall_flux_defect(geom: VesselGeometry, sol: Solution1D, ans: VelocityAnsatz) -> float:
    """Largest mismatch of (U.n) J_eps against (eps^4 / 16 mu) F on plateau
    nodes, relative to the largest right-hand side."""
    from .fields import wall_flux_density

    mask = (sol.s <= ans.cutoff.s_in) & (sol.s > 0)
    s = sol.s[mask]
    th = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
    S, T = np.meshgrid(s, th, indexing="ij")
    lhs = wall_flux_density(geom, sol, S, T, ans)
    rhs = geom.eps ** 4 / (16.0 * sol.params.mu) * sol.F[mask][:, None]
    if not s.size:
        return 0.0
    scale = float(np.max(np.abs(rhs)))
    err = float(np.max(np.abs(lhs - rhs)))
    return err / scale if scale > 0 else err


# ---------------------------------------------------------------------------
# solve-3d1d
# ---------------------------------------------------------------------------


def run_pair(cfg: RunConfig, geom: VesselGeometry, n_s: int, n_theta: int):
    """Shared-station 1D and 3D-1D solves plus their comparison."""
    nm = cfg.data["numerics"]
    ctx = cfg.kernel()
    params = cfg.params()
    mesh1d = Mesh1D.graded(n_s, cfg.h_min(geom.eps))
    sol = solve_pressure(assemble_system(geom, ctx, mesh1d, params), tol=nm["residual_1d"])
    bmesh = build_boundary_mesh(geom, n_s, n_theta, mesh1d=mesh1d)
    bem = solve_bem(assemble_bem(geom, bmesh, params, ctx.variant), tol=nm["residual_bem"])
    cmp = compare_to_1d(bem, sol, ctx=ctx)
    return sol, bem, cmp


def cmd_solve_3d1d(cfg: RunConfig, out: Path) -> RunReport:
    rep = RunReport("solve-3d1d", cfg)
    nm = cfg.data["numerics"]
    with rep.timed("geometry"):
        geom, grep = _validated_geometry(cfg)
    rep.results["geometry"] = grep.to_dict()
    with rep.timed("solve"):
        sol, bem, cmp = run_pair(cfg, geom, int(nm["n_s"]), int(nm["n_theta"]))
    cons = bem.conservation_error()
    rep.results["comparison"] = cmp
    rep.results["bem"] = {
        "n_panels": bem.system.n_panels,
        "residual": bem.residual,
        "condition": bem.condition,
        "total_wall_flux": bem.total_wall_flux(),
        "inlet_flux": bem.inlet_flux(),
        "conservation_error": cons,
    }
    rep.check("residual_bem", bem.residual, f"<= {nm['residual_bem']:g}", bem.residual <= nm["residual_bem"])
    rep.check("global_conservation", cons, f"<= {nm['conservation_tol']:g}", cons <= nm["conservation_tol"])
    if sol.params.kappa == 0:
        rep.check("kappa_zero_comparison", cmp["ha_error"], "<= 1e-12", cmp["ha_error"] <= 1e-12)

    out.mkdir(parents=True, exist_ok=True)
    bem.pressure_to_csv(out / "bem_pressure.csv")
    bem.panels_to_csv(out / "bem_panels.csv")
    sol.to_csv(out / "solution.csv")
    (out / "comparison.json").write_text(json.dumps(cmp, indent=2, sort_keys=True))
    rep.write(out)
    return rep


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def sweep_theta(cfg: RunConfig, eps_list, threads: int = 1) -> list[float]:
    """Full-surface theta deviation of q^SB divided by |p0| for each eps."""
    sw = cfg.data["sweep"]
    ctx = cfg.kernel()

    def one(eps):
        geom, _ = _validated_geometry(cfg, eps, sw["theta_geometry"])
        sol = _solve_on(cfg, geom, int(cfg.data["numerics"]["n_1d"]))
        tv = theta_variation(ctx, geom, sol, n_theta=int(sw["theta_n_theta"]))
        return tv.surface / abs(sol.params.p0)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        return list(ex.map(one, eps_list))


def sweep_pairs(cfg: RunConfig, eps_list, threads: int = 1) -> list[dict]:
    """Per-eps 3D-1D comparison and a-priori ratios on the configured geometry."""
    sw = cfg.data["sweep"]

    def one(eps):
        geom, _ = _validated_geometry(cfg, eps)
        row: dict = {"eps": eps}
        sol = None
        if sw["run_bem"]:
            sol, bem, cmp = run_pair(cfg, geom, int(sw["n_s"]), int(sw["n_theta"]))
            row.update(cmp)
            row["conservation_error"] = bem.conservation_error()
        if sol is None or sol.mesh.n != int(sw["n_1d"]):
            sol = _solve_on(cfg, geom, int(sw["n_1d"]))
        row["ratios"] = check_apriori_bounds(sol)
        return row

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        return list(ex.map(one, eps_list))


def cmd_sweep(cfg: RunConfig, out: Path, threads: int = 1) -> RunReport:
    rep = RunReport("sweep", cfg)
    sw = cfg.data["sweep"]
    eps = list(sw["eps"])
    if len(eps) < 3 or len(sw["theta_eps"]) < 3:
        raise ConfigError("a sweep needs at least three epsilon values")
    with rep.timed("pairs"):
        rows = sweep_pairs(cfg, eps, threads)
    with rep.timed("theta"):
        theta = sweep_theta(cfg, sw["theta_eps"], threads)

    out.mkdir(parents=True, exist_ok=True)
    fits: dict = {}
    tfit = loglog_slopes(sw["theta_eps"], theta)
    fits["theta_variation"] = tfit
    rep.check("theta_variation_slope", tfit["slope"], "in [0.8, 1.3]", 0.8 <= tfit["slope"] <= 1.3)
    _write_csv(out / "theta_sweep.csv", ["eps", "theta_deviation"], zip(sw["theta_eps"], theta))

    if sw["run_bem"]:
        ha = [r["ha_error"] for r in rows]
        fits["ha_error"] = loglog_slopes(eps, ha)
        fits["surface_l2_error"] = loglog_slopes(eps, [r["surface_l2_error"] for r in rows])
        fits["gradient_probe_rms"] = loglog_slopes(eps, [r["gradient_probe_rms"] for r in rows])
        mono = all(b < a for a, b in zip(ha, ha[1:]))
        rep.check("ha_error_monotone", ha, "strictly decreasing", mono)
        rep.check("ha_error_slope", fits["ha_error"]["slope"], ">= 0.4", fits["ha_error"]["slope"] >= 0.4)

    spread = ratio_spread([r["ratios"] for r in rows])
    fits["ratio_spread"] = spread
    for k, v in spread.items():
        rep.check(f"ratio_spread_{k}", v, f"< {SPREAD_LIMIT:g}", v < SPREAD_LIMIT)

    header = ["eps", "ha_error", "surface_l2_error", "gradient_probe_rms"] + [f"ratio_{k}" for k in spread]
    table = []
    for r in rows:
        table.append([r["eps"], r.get("ha_error", math.nan), r.get("surface_l2_error", math.nan),
                      r.get("gradient_probe_rms", math.nan)] + [r["ratios"][k] for k in spread])
    _write_csv(out / "sweep.csv", header, table)
    (out / "fits.json").write_text(json.dumps(fits, indent=2, sort_keys=True))
    rep.results["rows"] = rows
    rep.results["theta"] = theta
    rep.results["fits"] = fits
    rep.write(out)
    return rep


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def hardy_witnesses() -> dict:
    """Fixed test functions with u(0) = 0 for the weighted Poincare check."""
    return {
        "s": lambda s: s,
        "s^0.6": lambda s: s ** 0.6,
        "(1-s)^-0.4 - 1": lambda s: (1.0 - s) ** -0.4 - 1.0,
    }


def poincare_check(seed: int, constant: float, count: int = 100, n: int = 4096, h_min: float = 1e-8) -> dict:
    """Largest ||u|| / ||a^2 u'|| over seeded random functions and the witnesses."""
    geom = VesselGeometry.straight(0.05)
    s = Mesh1D.graded(n, h_min).nodes
    rng = np.random.default_rng(seed)
    rand = [poincare_ratio(s, u, geom.a) for u in random_poincare_functions(rng, s, count)]
    wit = {k: poincare_ratio(s, f(s), geom.a) for k, f in hardy_witnesses().items()}
    return {
        "constant": constant,
        "random_max": max(rand),
        "random_passed": all(r <= constant for r in rand),
        "witnesses": wit,
        "witness_failures": sorted(k for k, v in wit.items() if v > constant),
    }


def greens_oracle(eps: float = 0.05, count: int = 20) -> dict:
    """Relative errors of S_N[1] on the straight line against the closed form."""
    geom = VesselGeometry.straight(eps)
    L = math.sqrt(1.0 - eps ** 2)
    rng = np.random.default_rng(7)
    rho = rng.uniform(3.0 * eps, 0.6, count)
    z = rng.uniform(0.02, 1.2, count)
    phi = rng.uniform(0.0, 2.0 * np.pi, count)
    x = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    one = LineDensity(np.linspace(0.0, 1.0, 17), np.ones(17))
    out = {}
    for variant in ("free-space", "half-space"):
        ctx = KernelContext(variant)
        exact = straight_line_potential(rho, z, L)
        if ctx.image:
            exact = exact + straight_line_potential(rho, -z, L)
        exact = exact / (4.0 * math.pi * L)
        got = sn_apply(ctx, geom, one, x)
        out[f"{variant}_offsurface"] = float(np.max(np.abs(got - exact) / np.abs(exact)))
        s = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
        r = eps * geom.a(s)
        xs = np.stack([r, np.zeros_like(r), s], axis=-1)
        ex = straight_line_potential(r, s, L)
        if ctx.image:
            ex = ex + straight_line_potential(r, -s, L)
        ex = ex / (4.0 * math.pi * L)
        got = sn_apply(ctx, geom, one, xs)
        out[f"{variant}_onsurface"] = float(np.max(np.abs(got - ex) / np.abs(ex)))
    return out


def sphere_oracle(jump_sign: float = -1.0, n: int = 16) -> float:
    """Exterior normal derivative of the unit-density single layer on the unit
    sphere, at the collocation point farthest from the exact value -1."""
    mesh = sphere_mesh(n, n)
    _, dn = normal_derivative_operator(mesh, "free-space", jump_sign)
    vals = dn @ np.ones(mesh.n_panels)
    return float(vals[np.argmax(np.abs(vals + 1.0))])


def cmd_validate(cfg: RunConfig, out: Path, seed: int | None = None) -> RunReport:
    rep = RunReport("validate", cfg)
    vd = cfg.data["validate"]
    seed = int(cfg.data["seed"] if seed is None else seed)
    rep.results["seed"] = seed

    with rep.timed("geometry"):
        geom = cfg.geometry()
        grep = validate_admissible(geom)
    rep.results["geometry"] = grep.to_dict()
    rep.check("geometry_admissible", [c.name for c in grep.failures()], "no failures", grep.passed)

    with rep.timed("greens"):
        g = greens_oracle()
        for k, v in g.items():
            tol = 1e-10 if k.endswith("offsurface") else 1e-6
            rep.check(f"greens_oracle_{k}", v, f"<= {tol:g}", v <= tol)
        rng = np.random.default_rng(seed)
        x = rng.uniform([-1, -1, 0.1], [1, 1, 2], (16, 3))
        y = rng.uniform([-1, -1, 0.1], [1, 1, 2], (16, 3))
        ctx = KernelContext("half-space")
        asym = float(np.max(np.abs(eval_green(ctx, x, y) - eval_green(ctx, y, x))))
        rep.check("green_symmetry", asym, "<= 1e-14", asym <= 1e-14)
        h = 1e-5
        w = np.column_stack([x[:, :2], np.zeros(16)])
        dz = (eval_green(ctx, w + [0, 0, h], y) - eval_green(ctx, w - [0, 0, h], y)) / (2 * h)
        nz = float(np.max(np.abs(dz)))
        rep.check("green_neumann_wall", nz, "<= 1e-8", nz <= 1e-8)

    with rep.timed("poincare"):
        pc = poincare_check(seed, float(vd["poincare_constant"]))
        rep.results["poincare"] = pc
        rep.check("poincare_random", pc["random_max"], f"<= {pc['constant']:g}", pc["random_passed"])
        rep.check("poincare_witnesses", pc["witnesses"], f"<= {pc['constant']:g}",
                  not pc["witness_failures"], note=", ".join(pc["witness_failures"]))

    n1 = int(vd["n_1d"])
    with rep.timed("solver1d"):
        sol = _solve_on(cfg, geom, n1)
        fb = abs(sol.flux_balance())
        rep.check("flux_balance", fb, "<= 1e-8", fb <= 1e-8)
        rep.check("residual_1d", sol.residual, "<= 1e-10", sol.residual <= 1e-10)
        k0 = RunConfig.from_dict({**cfg.data, "physics": {**cfg.data["physics"], "kappa": 0.0}})
        sol0 = _solve_on(k0, geom, n1)
        dev = float(max(np.max(np.abs(sol0.p - sol0.params.p0)), np.max(np.abs(sol0.F))))
        rep.check("kappa_zero_exact_1d", dev, "<= 1e-12", dev <= 1e-12)
        p2 = RunConfig.from_dict({**cfg.data, "physics": {**cfg.data["physics"],
                                                          "p0": 2.0 * cfg.data["physics"]["p0"]}})
        sol2 = _solve_on(p2, geom, n1)
        lin = float(max(np.max(np.abs(sol2.p - 2 * sol.p)), np.max(np.abs(sol2.F - 2 * sol.F)))
                    / max(np.max(np.abs(sol2.p)), 1e-300))
        rep.check("linearity_p0", lin, "<= 1e-12", lin <= 1e-12)
        if sol.params.p0 != 0:
            ratios = check_apriori_bounds(sol)
            rep.results["apriori_ratios"] = ratios
            worst = max(ratios.values())
            rep.check("apriori_ratios_bounded", worst, "<= 10", worst <= 10.0)

    with rep.timed("fields"):
        straight = VesselGeometry.straight(geom.eps)
        ss = _solve_on(cfg, straight, n1)
        ans = VelocityAnsatz(straight, ss)
        sp = plateau_nodes(ss, ans.cutoff)
        sp = sp[sp > 0]
        S, T = np.meshgrid(sp, np.linspace(0, 2 * np.pi, 8, endpoint=False), indexing="ij")
        div = float(np.max(np.abs(ans.divergence(0.5 * straight.eps * straight.a(S), T, S))))
        rep.check("straight_divergence_free", div, "<= 1e-10", div <= 1e-10)
        wf = _wall_flux_defect(straight, ss, ans)
        rep.check("straight_wall_flux_identity", wf, "<= 1e-10", wf <= 1e-10)
        arc = VesselGeometry.arc(geom.eps)
        sa = _solve_on(cfg, arc, n1)
        aa = VelocityAnsatz(arc, sa)
        s_pts = np.array([0.2, 0.4, 0.6])
        th = np.array([0.3, 2.0, 4.0])
        r = 0.5 * arc.eps * arc.a(s_pts)
        exact = aa.divergence(r, th, s_pts)
        e1 = np.max(np.abs(fd_divergence(aa, r, th, s_pts, 2e-4) - exact))
        e2 = np.max(np.abs(fd_divergence(aa, r, th, s_pts, 1e-4) - exact))
        rate = float(e1 / e2) if e2 > 0 else math.inf
        rep.check("curved_divergence_fd_rate", rate, ">= 3 (second order)", rate >= 3.0 or e1 < 1e-12)
        ff = far_field_ratio(cfg.kernel(), geom, sol)
        rep.check("far_field_monopole", ff, "within 1% of 1", abs(ff - 1.0) <= 0.01)

    with rep.timed("bem"):
        val = sphere_oracle(float(vd["jump_sign"]))
        rep.check("sphere_jump_oracle", val, "-1 within 2%", abs(val + 1.0) <= 0.02)
        g16 = VesselGeometry.straight(geom.eps)
        _, b0, _ = run_pair(k0, g16, 16, 8)
        dev = float(max(np.max(np.abs(b0.p - b0.system.params.p0)), np.max(np.abs(b0.sigma))))
        rep.check("kappa_zero_exact_bem", dev, "<= 1e-12", dev <= 1e-12)
        _, b1, _ = run_pair(cfg, g16, 16, 8)
        cons = b1.conservation_error()
        rep.check("bem_conservation", cons, "<= 1e-8", cons <= 1e-8)

    rep.write(out)
    return rep


# ---------------------------------------------------------------------------
# sample-fields
# ---------------------------------------------------------------------------


def cmd_sample_fields(cfg: RunConfig, out: Path) -> RunReport:
    rep = RunReport("sample-fields", cfg)
    fd = cfg.data["fields"]
    with rep.timed("geometry"):
        geom, _ = _validated_geometry(cfg)
    with rep.timed("solve"):
        sol = _solve_on(cfg, geom, int(cfg.data["numerics"]["n_1d"]))
    ctx = cfg.kernel()
    out.mkdir(parents=True, exist_ok=True)
    with rep.timed("box"):
        box = fd["box"]
        grid = sample_fields(ctx, geom, sol, box_points(box["lo"], box["hi"], box["shape"]))
        grid.to_csv(out / "fields.csv")
    with rep.timed("surface"):
        ns, nt = int(fd["surface"]["n_s"]), int(fd["surface"]["n_theta"])
        st = np.linspace(0.0, 1.0, ns + 2)[1:-1]
        q = surface_pressure(ctx, geom, sol, st, nt)
        th = 2.0 * np.pi * np.arange(nt) / nt
        rows = []
        for i, s in enumerate(st):
            for j, t in enumerate(th):
                x = point(geom, geom.eps * geom.a(s), t, s)
                rows.append([float(s), float(t), float(x[0]), float(x[1]), float(x[2]), float(q[i, j])])
        _write_csv(out / "surface.csv", ["s", "theta", "x", "y", "z", "q"], rows)
    counts = {t: int(np.sum(grid.tags == t)) for t in ("exterior", "interior", "wall-below")}
    rep.results["counts"] = counts
    rep.results["files"] = ["fields.csv", "surface.csv"]
    rep.write(out)
    return rep


COMMANDS = {
    "solve-1d": cmd_solve_1d,
    "solve-3d1d": cmd_solve_3d1d,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "sample-fields": cmd_sample_fields,
}

__all__ = [
    "COMMANDS",
    "POINCARE_CONSTANT",
    "Params",
    "cmd_sample_fields",
    "cmd_solve_1d",
    "cmd_solve_3d1d",
    "cmd_sweep",
    "cmd_validate",
    "greens_oracle",
    "hardy_witnesses",
    "loglog_slopes",
    "poincare_check",
    "run_pair",
    "sphere_oracle",
    "sweep_pairs",
    "sweep_theta",
]
