"""Command line entry point: simulate, sweep, regime, selftest."""
from __future__ import annotations

import argparse
import copy
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import storage
from .analysis import RegimeQuery, regime_classify
from .config import ExperimentConfig, parse_config, validate
from .errors import ConfigError
from .integrator import DIAGNOSTIC_COLUMNS, run_trajectory
from .noise import RngStream
from .spectral import to_physical

log = logging.getLogger("fracscalar")


def _initial(cfg: ExperimentConfig, rng: RngStream):
    return cfg.initial_field(rng)


def simulate(cfg: ExperimentConfig, outdir: Path | None = None) -> dict:
    """Run the configured ensemble and write diagnostics, snapshots and a manifest.

    Trajectories run in stream order 1..m; returns the manifest contents.
    """
    outdir = Path(outdir or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, str] = {}
    summary = []
    for i in range(1, cfg.m + 1):
        rng = RngStream(cfg.master_seed, i)
        theta0 = _initial(cfg, rng)
        traj = run_trajectory(theta0, cfg.solver, rng)
        tag = "" if cfg.m == 1 else f"_{i:04d}"
        name = f"diagnostics{tag}.csv"
        artifacts[name] = storage.write_text(outdir / name, storage.diagnostics_csv(traj.diagnostics, DIAGNOSTIC_COLUMNS))
        if cfg.snapshot_stride:
            snapdir = outdir / "snapshots"
            snapdir.mkdir(exist_ok=True)
            for n, f in zip(traj.snapshot_steps, traj.snapshots):
                field = to_physical(f) if cfg.snapshot_space == "physical" else f
                rel = f"snapshots/traj{i:04d}_step{n:08d}.snap"
                artifacts[rel] = storage.write_snapshot(outdir / rel, field, n * cfg.solver.dt)
        stop = traj.stopped_at
        summary.append(
            {
                "stream": i,
                "final_t": float(traj.final.t),
                "final_l2": float(traj.column("l2")[-1]),
                "stopped": None if stop is None else {"reason": stop.reason, "step": stop.step, "t": stop.t},
                "hitting": traj.hitting,
            }
        )
        log.info("trajectory %d/%d done (t=%.6g%s)", i, cfg.m, traj.final.t, "" if stop is None else f", stopped: {stop.reason}")
    seeds = {"master_seed": cfg.master_seed, "streams": list(range(1, cfg.m + 1))}
    storage.write_manifest(outdir, cfg.echo(), seeds, artifacts, {"trajectories": summary})
    return storage.read_manifest(outdir / "manifest.json")


SWEEP_COLUMNS = ("parameter", "value", "m", "blowup_fraction", "mean_final_l2", "mean_sup_lq", "mean_int_h_beta")


def _set_path(doc: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError([f"{dotted}: not a configuration path"])
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError([f"{dotted}: not a configuration path"])
    node[keys[-1]] = value


def sweep(cfg: ExperimentConfig, parameter: str, values: list, outdir: Path | None = None) -> list[dict]:
    """Repeat the ensemble over a parameter grid; one summary row per point."""
    outdir = Path(outdir or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        doc = copy.deepcopy(cfg.document)
        _set_path(doc, parameter, value)
        point = validate(doc, cfg.base_dir)
        finals, sups, ints, blown = [], [], [], []
        for i in range(1, point.m + 1):
            rng = RngStream(point.master_seed, i)
            traj = run_trajectory(_initial(point, rng), point.solver, rng)
            finals.append(traj.column("l2")[-1])
            sups.append(np.max(traj.column("lq") ** point.solver.q))
            ints.append(trapezoid(traj.h_beta**2, traj.times) if len(traj.times) > 1 else 0.0)
            blown.append(traj.stopped_at is not None and traj.stopped_at.reason == "blowup")
        ok = ~np.array(blown)
        rows.append(
            {
                "parameter": parameter,
                "value": value,
                "m": point.m,
                "blowup_fraction": float(np.mean(blown)),
                "mean_final_l2": float(np.mean(np.array(finals)[ok])) if ok.any() else math.nan,
                "mean_sup_lq": float(np.mean(np.array(sups)[ok])) if ok.any() else math.nan,
                "mean_int_h_beta": float(np.mean(np.array(ints)[ok])) if ok.any() else math.nan,
            }
        )
    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        cells = [r["parameter"], str(r["value"]), str(r["m"])] + [f"{r[c]:.17g}" for c in SWEEP_COLUMNS[3:]]
        lines.append(",".join(cells))
    digest = storage.write_text(outdir / "sweep.csv", "\n".join(lines) + "\n")
    storage.write_manifest(
        outdir,
        cfg.echo(),
        {"master_seed": cfg.master_seed, "streams": list(range(1, cfg.m + 1))},
        {"sweep.csv": digest},
        {"sweep": {"parameter": parameter, "values": list(values)}},
    )
    return rows


def _float_or_inf(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def _load(path: str) -> ExperimentConfig:
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json" and '"fracscalar-run-manifest"' in text:
        return parse_config(storage.read_manifest(p)["config"], p.parent)
    return parse_config(text, p.parent)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracscalar", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configured experiment")
    p.add_argument("config", help="YAML config, or a manifest.json to re-run")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")

    p = sub.add_parser("sweep", help="repeat an experiment over a parameter grid")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="dotted config key, e.g. equation.alpha")
    p.add_argument("--values", required=True, nargs="+")
    p.add_argument("--out")

    p = sub.add_parser("regime", help="classify a parameter regime")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mode", default="ca", help="ca, cb or cc")
    p.add_argument("--q", type=_float_or_inf, default=2.0)
    p.add_argument("--q0", type=_float_or_inf, default=math.inf)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--json", action="store_true", help="print the machine-readable record")
    p.add_argument("--out", help="also write the certificate as JSON to this file")

    p = sub.add_parser("selftest", help="run the built-in invariant and acceptance checks")
    p.add_argument("--quick", action="store_true", help="skip the long Monte Carlo checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "simulate":
            cfg = _load(args.config)
            if args.seed is not None:
                cfg.document["ensemble"]["master_seed"] = args.seed
                cfg = parse_config(cfg.document, cfg.base_dir)
            manifest = simulate(cfg, Path(args.out) if args.out else None)
            print(f"wrote {len(manifest['artifacts'])} artifacts to {args.out or cfg.output_dir}")
            return 0
        if args.command == "sweep":
            cfg = _load(args.config)
            rows = sweep(cfg, args.param, [_parse_value(v) for v in args.values], Path(args.out) if args.out else None)
            for r in rows:
                print(f"{r['parameter']}={r['value']}: blowup={r['blowup_fraction']:.3g} final_l2={r['mean_final_l2']:.6g}")
            return 0
        if args.command == "regime":
            qr = RegimeQuery(args.d, args.alpha, args.mode, args.q, args.q0, args.p, args.delta)
            cert = regime_classify(qr)
            print(cert.to_json() if args.json else cert.to_text())
            if args.out:
                Path(args.out).write_text(cert.to_json() + "\n")
            return 0
        if args.command == "selftest":
            from .selftest import run_all

            results = run_all(quick=args.quick, stream=sys.stdout)
            return 0 if all(r.passed for r in results) else 1
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1
