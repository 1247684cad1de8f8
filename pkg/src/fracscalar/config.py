"""Experiment configuration: a YAML key-value tree validated as a whole.

Every violation is collected before raising ``ConfigError``, and unknown keys
are errors. ``ExperimentConfig.document`` holds the normalized tree with all
defaults filled in; it round-trips through ``parse_config``.
"""
from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .analysis import RegimeQuery
from .constitutive import PRESETS, classify_mode, preset
from .errors import ConfigError
from .integrator import SolverConfig, StoppingLadder
from .noise import CovarianceSpec, DiffusionSpec, RngStream
from .storage import read_snapshot
from .spectral import PhysicalField, SpectralField, TorusGrid, dealias, single_mode, sobolev_norm, to_spectral

REQUIRED = object()

SCHEMA: dict[str, dict[str, Any]] = {
    "grid": {"d": REQUIRED, "n": REQUIRED},
    "equation": {"nu": REQUIRED, "alpha": REQUIRED, "law": None, "gamma": None, "regularity": "C_b"},
    "noise": {
        "deterministic": False,
        "covariance": {"kind": "powerlaw", "a": 1.0, "r": 0.0, "kmax": 1},
        "diffusion": {"kind": "additive", "c": 1.0},
    },
    "time": {"dt": REQUIRED, "t_end": REQUIRED},
    "stopping": None,
    "init": {"kind": "mode"},
    "ensemble": {"m": 1, "master_seed": 0},
    "output": {"directory": "run", "diagnostics_stride": 1, "snapshot_stride": 0, "snapshot_space": "physical"},
    "diagnostics": {"q": 2.0, "beta": 0.0},
    "regime": None,
}

STOPPING_KEYS = {"s": 0.0, "q": 2.0, "thresholds": REQUIRED}
REGIME_KEYS = {"q": 2.0, "q0": "inf", "p": 2.0, "delta": 0.0}
INIT_KEYS = {
    "mode": {"kind": "mode", "k": None, "amplitude": 1.0, "phase": "cos"},
    "random": {"kind": "random", "norm": 1.0, "s": 0.0, "q": 2.0, "slope": 2.0, "kcut": 8, "seed": 0, "per_trajectory": False},
    "file": {"kind": "file", "path": REQUIRED},
}


def _merge(section: str, given: Any, schema: dict, errors: list[str]) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        errors.append(f"{section}: expected a mapping")
        return {}
    out = {}
    for key in given:
        if key not in schema:
            errors.append(f"{section}.{key}: unknown key")
    for key, default in schema.items():
        if isinstance(default, dict):
            out[key] = _merge(f"{section}.{key}", given.get(key), default, errors)
        elif key in given:
            out[key] = given[key]
        elif default is REQUIRED:
            errors.append(f"{section}.{key}: required")
        else:
            out[key] = default
    return out


def _number(value, name, errors, integer=False):
    if isinstance(value, str):
        # YAML 1.1 reads exponent literals like 1e-3 as strings
        try:
            value = float(value)
        except ValueError:
            pass
        else:
            if math.isinf(value):
                return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{name}: expected a number, got {value!r}")
        return None
    if integer and int(value) != value:
        errors.append(f"{name}: expected an integer, got {value!r}")
        return None
    return int(value) if integer else float(value)


@dataclass
class ExperimentConfig:
    document: dict
    solver: SolverConfig
    m: int
    master_seed: int
    output_dir: Path
    diagnostics_stride: int
    snapshot_stride: int
    snapshot_space: str
    regime: RegimeQuery | None
    base_dir: Path

    def initial_field(self, rng: RngStream | None = None) -> SpectralField:
        return build_initial(self.document["init"], self.solver.grid, rng, self.base_dir)

    def echo(self) -> dict:
        return copy.deepcopy(self.document)


def parse_config(text: str | dict, base_dir: str | Path = ".") -> ExperimentConfig:
    doc = yaml.safe_load(text) if isinstance(text, str) else copy.deepcopy(text)
    if not isinstance(doc, dict):
        raise ConfigError(["configuration must be a mapping"])
    return validate(doc, Path(base_dir))


def validate(doc: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    errors: list[str] = []
    for key in doc:
        if key not in SCHEMA:
            errors.append(f"{key}: unknown section")
    norm: dict[str, Any] = {}
    for section, schema in SCHEMA.items():
        given = doc.get(section)
        if schema is None:
            if section == "stopping" and given is not None:
                norm[section] = _merge(section, given, STOPPING_KEYS, errors)
            elif section == "regime" and given is not None:
                norm[section] = _merge(section, given, REGIME_KEYS, errors)
            else:
                norm[section] = None
        elif section == "init":
            given = {} if given is None else given
            kind = given.get("kind", "mode") if isinstance(given, dict) else None
            if kind not in INIT_KEYS:
                errors.append(f"init.kind: must be one of {sorted(INIT_KEYS)}, got {kind!r}")
                norm[section] = {"kind": kind}
            else:
                norm[section] = _merge(section, given, INIT_KEYS[kind], errors)
        else:
            norm[section] = _merge(section, given, schema, errors)

    g, eq, nz, tm = norm["grid"], norm["equation"], norm["noise"], norm["time"]
    d = _number(g.get("d"), "grid.d", errors, integer=True)
    n = _number(g.get("n"), "grid.n", errors, integer=True)
    grid = None
    if d is not None and n is not None:
        try:
            grid = TorusGrid(d, n)
        except ValueError as exc:
            errors.append(f"grid: {exc}")

    nu = _number(eq.get("nu"), "equation.nu", errors)
    alpha = _number(eq.get("alpha"), "equation.alpha", errors)
    if nu is not None and not nu > 0:
        errors.append("equation.nu: must be positive")
    if alpha is not None and not 0 < alpha <= 2:
        errors.append("equation.alpha: must lie in (0, 2]")
    law = None
    if eq.get("law") is not None:
        if eq["law"] not in PRESETS:
            errors.append(f"equation.law: unknown preset {eq['law']!r} (choose from {', '.join(PRESETS)})")
        else:
            try:
                law = preset(eq["law"], eq.get("gamma"))
                if eq.get("regularity") != law.regularity:
                    law = replace(law, regularity=eq["regularity"])
                if grid is not None and law.d != grid.d:
                    errors.append(f"equation.law: {law.name} is {law.d}-dimensional but grid.d = {grid.d}")
            except ValueError as exc:
                errors.append(f"equation.law: {exc}")

    cov = diff = None
    cv = nz["covariance"]
    try:
        kmax = _number(cv["kmax"], "noise.covariance.kmax", errors, integer=True)
        cov = CovarianceSpec(cv["kind"], float(cv["a"]), float(cv["r"]), kmax if kmax is not None else 0)
        if grid is not None and cov.kmax > grid.n // 2:
            errors.append(f"noise.covariance.kmax: kmax={cov.kmax} exceeds n/2={grid.n // 2}")
    except (ValueError, TypeError) as exc:
        errors.append(f"noise.covariance: {exc}")
    try:
        diff = DiffusionSpec(nz["diffusion"]["kind"], float(nz["diffusion"]["c"]))
    except (ValueError, TypeError) as exc:
        errors.append(f"noise.diffusion: {exc}")
    if not isinstance(nz["deterministic"], bool):
        errors.append("noise.deterministic: expected true/false")

    dt = _number(tm.get("dt"), "time.dt", errors)
    t_end = _number(tm.get("t_end"), "time.t_end", errors)
    if dt is not None and not dt > 0:
        errors.append("time.dt: must be positive")
    if t_end is not None and not t_end > 0:
        errors.append("time.t_end: must be positive")
    if dt and t_end and dt > 0 and t_end > 0 and abs(t_end / dt - round(t_end / dt)) > 1e-9 * t_end / dt:
        errors.append("time.t_end: must be an integer multiple of time.dt")

    ladder = None
    if norm["stopping"] is not None:
        st = norm["stopping"]
        try:
            ladder = StoppingLadder(tuple(st["thresholds"]), float(st["s"]), float(st["q"]))
        except (ValueError, TypeError) as exc:
            errors.append(f"stopping.thresholds: ladder not increasing or invalid ({exc})")

    ens, out, dg = norm["ensemble"], norm["output"], norm["diagnostics"]
    m = _number(ens["m"], "ensemble.m", errors, integer=True)
    if m is not None and m < 1:
        errors.append("ensemble.m: must be >= 1")
    seed = _number(ens["master_seed"], "ensemble.master_seed", errors, integer=True)
    if seed is not None and not 0 <= seed < 2**64:
        errors.append("ensemble.master_seed: must be a 64-bit unsigned integer")
    dstride = _number(out["diagnostics_stride"], "output.diagnostics_stride", errors, integer=True)
    sstride = _number(out["snapshot_stride"], "output.snapshot_stride", errors, integer=True)
    if dstride is not None and dstride < 1:
        errors.append("output.diagnostics_stride: must be >= 1")
    if sstride is not None and sstride < 0:
        errors.append("output.snapshot_stride: must be >= 0")
    if out["snapshot_space"] not in ("physical", "spectral"):
        errors.append("output.snapshot_space: must be 'physical' or 'spectral'")
    q = _number(dg["q"], "diagnostics.q", errors)
    beta = _number(dg["beta"], "diagnostics.beta", errors)
    if q is not None and not q >= 2:
        errors.append("diagnostics.q: must be >= 2")

    if grid is not None and not np.any(grid.dealias_mask & (grid.kmag > 0)):
        errors.append("grid.n: dealiased band is empty")

    init = norm["init"]
    if init.get("kind") == "mode" and grid is not None:
        k = init.get("k") or [1] + [0] * (grid.d - 1)
        init["k"] = list(k)
        if len(k) != grid.d:
            errors.append(f"init.k: expected {grid.d} components")
        elif any(abs(int(ki)) > grid.n / 3 for ki in k):
            errors.append("init.k: mode lies outside the dealiased band")
        if init.get("phase") not in ("cos", "sin"):
            errors.append("init.phase: must be 'cos' or 'sin'")
    if init.get("kind") == "random" and grid is not None:
        if not 1 <= int(init["kcut"]) <= grid.n / 3:
            errors.append("init.kcut: must lie in [1, n/3]")

    regime = None
    if norm["regime"] is not None and not errors:
        rg = norm["regime"]
        try:
            regime = RegimeQuery(
                d=grid.d,
                alpha=alpha,
                mode=classify_mode(law) if law is not None else "C_b",
                q=_number(rg["q"], "regime.q", errors),
                q0=_number(rg["q0"], "regime.q0", errors),
                p=_number(rg["p"], "regime.p", errors),
                delta=_number(rg["delta"], "regime.delta", errors),
            )
        except (ValueError, TypeError) as exc:
            errors.append(f"regime: {exc}")

    solver = None
    if not errors:
        try:
            solver = SolverConfig(
                nu=nu,
                alpha=alpha,
                grid=grid,
                dt=dt,
                t_end=t_end,
                law=law,
                cov=cov,
                diff=diff,
                deterministic=nz["deterministic"],
                stopping=ladder,
                q=q,
                beta=beta,
                output_every=dstride,
                snapshot_every=sstride,
            )
        except ValueError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError(errors)

    outdir = os.environ.get("FRACSCALAR_OUTPUT_DIR") or out["directory"]
    return ExperimentConfig(
        document=norm,
        solver=solver,
        m=m,
        master_seed=seed,
        output_dir=Path(outdir),
        diagnostics_stride=dstride,
        snapshot_stride=sstride,
        snapshot_space=out["snapshot_space"],
        regime=regime,
        base_dir=base_dir,
    )


def filtered_random_field(
    grid: TorusGrid,
    rng: RngStream,
    norm: float = 1.0,
    s: float = 0.0,
    q: float = 2.0,
    slope: float = 2.0,
    kcut: int = 8,
) -> SpectralField:
    """Mean-zero Gaussian field with spectrum (1+|k|^2)^(-slope/2) on 0 < |k|_inf <= kcut,
    scaled so that |theta|_{H^{s,q}} = norm."""
    white = to_spectral(PhysicalField(grid, rng.standard_normal(grid.shape)))
    band = (grid.kinf <= kcut) & (grid.kmag > 0)
    c = np.where(band, (1.0 + grid.ksq) ** (-slope / 2.0) * white.coeffs, 0.0)
    field = dealias(SpectralField(grid, c))
    return field * (norm / sobolev_norm(field, s, q))


def build_initial(spec: dict, grid: TorusGrid, rng: RngStream | None = None, base_dir: Path = Path(".")) -> SpectralField:
    kind = spec["kind"]
    if kind == "mode":
        return single_mode(grid, spec["k"], spec["amplitude"], spec["phase"])
    if kind == "random":
        if not spec.get("per_trajectory") or rng is None:
            rng = RngStream(spec["seed"], 0)
        return filtered_random_field(grid, rng, spec["norm"], spec["s"], spec["q"], spec["slope"], int(spec["kcut"]))
    if kind == "file":
        path = Path(spec["path"])
        snap = read_snapshot(path if path.is_absolute() else base_dir / path)
        if snap.field.grid != grid:
            raise ConfigError([f"init.path: snapshot grid {snap.field.grid} does not match {grid}"])
        return snap.field if isinstance(snap.field, SpectralField) else to_spectral(snap.field)
    raise ConfigError([f"init.kind: unknown kind {kind!r}"])
