"""Run configuration and machine-readable run reports."""

from __future__ import annotations

import copy
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .geometry import VesselGeometry, geometry_from_dict
from .greens import VARIANTS, KernelContext
from .solver1d import Params

DEFAULTS: dict[str, Any] = {
    "geometry": {
        "centerline": {"kind": "straight"},
        "radius": {"kind": "spheroidal", "delta": 0.1, "tip_constant": 10.0},
        "eps": 0.05,
        "n_frame": 1025,
    },
    "physics": {"mu": 1.0, "kappa": 1.0, "zeta": 1.0, "p0": 1.0},
    "numerics": {
        "n_1d": 256,
        "n_s": 40,
        "n_theta": 16,
        "n_theta_ring": 32,
        "h_min": None,
        "kernel": "half-space",
        "order_regular": 8,
        "order_singular": 12,
        "proximity_factor": 3.0,
        "bem_far_order": 4,
        "bem_duffy_order": 12,
        "residual_1d": 1e-10,
        "residual_bem": 1e-8,
        "flux_balance_tol": 1e-8,
        "conservation_tol": 1e-4,
    },
    "sweep": {
        "eps": [0.1, 0.05, 0.025],
        "theta_geometry": {"kind": "arc", "radius": 1.0},
        "theta_eps": [0.1, 0.05, 0.025, 0.0125],
        "theta_n_theta": 64,
        "n_1d": 128,
        "n_s": 128,
        "n_theta": 8,
        "run_bem": True,
    },
    "validate": {"n_1d": 64, "poincare_constant": 2.05, "jump_sign": -1.0},
    "seed": 0,
    "fields": {
        "box": {"lo": [-0.3, -0.3, 0.0], "hi": [0.3, 0.3, 1.2], "shape": [7, 7, 13]},
        "surface": {"n_s": 16, "n_theta": 8},
    },
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and k not in ("centerline", "radius", "box", "surface", "theta_geometry"):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path + k!r} must be an object")
            out[k] = _merge(base[k], v, path + k + ".")
        elif isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path + k!r} must be an object")
            merged = copy.deepcopy(base[k]) if k in ("radius", "box", "surface") else {}
            merged.update(v)
            out[k] = merged
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    data: dict[str, Any]

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None = None) -> "RunConfig":
        cfg = cls(_merge(DEFAULTS, d or {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls.from_dict({})
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def validate(self) -> None:
        ph = self.data["physics"]
        for k in ("mu", "zeta"):
            if not ph[k] > 0:
                raise ConfigError(f"physics.{k} must be positive")
        if not ph["kappa"] >= 0:
            raise ConfigError("physics.kappa must be non-negative")
        nm = self.data["numerics"]
        for k in ("residual_1d", "residual_bem", "flux_balance_tol", "conservation_tol"):
            if not nm[k] > 0:
                raise ConfigError(f"numerics.{k} must be positive")
        for k in ("n_1d", "n_s"):
            if int(nm[k]) < 4:
                raise ConfigError(f"numerics.{k} too small")
        if int(nm["n_theta"]) < 8:
            raise ConfigError("numerics.n_theta must be at least 8")
        if nm["kernel"] not in VARIANTS:
            raise ConfigError(f"numerics.kernel must be one of {VARIANTS}")
        eps = self.data["geometry"]["eps"]
        if not 0 < eps < 1:
            raise ConfigError("geometry.eps must lie in (0, 1)")
        vd = self.data["validate"]
        if vd["jump_sign"] not in (-1, 1, -1.0, 1.0):
            raise ConfigError("validate.jump_sign must be -1 or +1")
        if not vd["poincare_constant"] > 0:
            raise ConfigError("validate.poincare_constant must be positive")
        if not isinstance(self.data["seed"], int) or self.data["seed"] < 0:
            raise ConfigError("seed must be a non-negative integer")
        h = nm["h_min"]
        if h is not None and not 0 < h < 1:
            raise ConfigError("numerics.h_min must lie in (0, 1)")
        for key in ("eps", "theta_eps"):
            lst = self.data["sweep"][key]
            if any(not 0 < e < 1 for e in lst):
                raise ConfigError(f"sweep.{key} entries must lie in (0, 1)")
            if any(b >= a for a, b in zip(lst, lst[1:])):
                raise ConfigError(f"sweep.{key} must be strictly decreasing")

    # -- derived objects ---------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self.data)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def geometry(self, eps: float | None = None, centerline: dict | None = None) -> VesselGeometry:
        g = copy.deepcopy(self.data["geometry"])
        if eps is not None:
            g["eps"] = eps
        if centerline is not None:
            g["centerline"] = centerline
        try:
            return geometry_from_dict(g)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"geometry block invalid: {exc}") from exc

    def params(self) -> Params:
        ph = self.data["physics"]
        return Params(float(ph["mu"]), float(ph["kappa"]), float(ph["zeta"]), float(ph["p0"]))

    def kernel(self) -> KernelContext:
        nm = self.data["numerics"]
        return KernelContext(nm["kernel"], float(nm["proximity_factor"]), int(nm["order_regular"]),
                             int(nm["order_singular"]), int(nm["n_theta_ring"]))

    def h_min(self, eps: float) -> float:
        h = self.data["numerics"]["h_min"]
        return eps ** 2 if h is None else float(h)


@dataclass
class Check:
    name: str
    value: float
    tolerance: str
    passed: bool
    acceptance: bool = True
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance,
                "passed": bool(self.passed), "acceptance": self.acceptance, "note": self.note}


@dataclass
class RunReport:
    command: str
    config: RunConfig
    results: dict[str, Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    def check(self, name: str, value, tolerance: str, passed: bool, acceptance: bool = True, note: str = "") -> Check:
        c = Check(name, _jsonable(value), tolerance, bool(passed), acceptance, note)
        self.checks.append(c)
        return c

    def timed(self, key: str):
        return _Timer(self, key)

    @property
    def acceptance_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.acceptance)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config.to_dict(),
            "config_hash": self.config.hash,
            "results": _jsonable(self.results),
            "checks": [c.to_dict() for c in self.checks],
            "acceptance_passed": self.acceptance_passed,
            "timings": self.timings,
            "errors": self.errors,
        }

    def write(self, out_dir: Path, name: str = "report.json") -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / name
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path


class _Timer:
    def __init__(self, report: RunReport, key: str):
        self.report, self.key = report, key

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.report.timings[self.key] = time.perf_counter() - self.t0
        return False


def _jsonable(v):
    import numpy as np

    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, float) and (v != v or v in (float("inf"), float("-inf"))):
        return str(v)
    return v
