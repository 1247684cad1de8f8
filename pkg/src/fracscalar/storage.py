"""Snapshot files, diagnostics CSV and run manifests.

Snapshot layout: an ASCII header of ``key=value`` lines terminated by
``end``, then the raw payload, row-major little-endian float64 (physical)
or interleaved (re, im) float64 pairs (spectral).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .spectral import PhysicalField, SpectralField, TorusGrid

FORMAT_VERSION = 1
MAGIC = "FRACSCALAR-SNAPSHOT"


@dataclass(frozen=True, eq=False)
class Snapshot:
    field: PhysicalField | SpectralField
    t: float

    @property
    def space(self) -> str:
        return "spectral" if isinstance(self.field, SpectralField) else "physical"


def encode_snapshot(field: PhysicalField | SpectralField, t: float) -> bytes:
    space = "spectral" if isinstance(field, SpectralField) else "physical"
    grid = field.grid
    header = [
        f"{MAGIC} {FORMAT_VERSION}",
        f"d={grid.d}",
        f"n={grid.n}",
        f"t={float(t)!r}",
        f"space={space}",
        "layout=row-major",
        "element=float64-le",
        "end",
    ]
    if space == "physical":
        payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    else:
        payload = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    return ("\n".join(header) + "\n").encode("ascii") + payload


def decode_snapshot(data: bytes) -> Snapshot:
    head, sep, payload = data.partition(b"\nend\n")
    if not sep:
        raise ValueError("snapshot header is not terminated")
    lines = head.decode("ascii").split("\n")
    magic, _, version = lines[0].partition(" ")
    if magic != MAGIC or int(version) != FORMAT_VERSION:
        raise ValueError(f"not a version {FORMAT_VERSION} snapshot")
    meta = dict(line.split("=", 1) for line in lines[1:])
    if meta.get("layout") != "row-major" or meta.get("element") != "float64-le":
        raise ValueError("unsupported snapshot layout")
    grid = TorusGrid(int(meta["d"]), int(meta["n"]))
    if meta["space"] == "physical":
        expected = grid.size * 8
        dtype = "<f8"
    else:
        expected = grid.size * 16
        dtype = "<c16"
    if len(payload) != expected:
        raise ValueError(f"payload has {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(grid.shape)
    field = PhysicalField(grid, arr) if meta["space"] == "physical" else SpectralField(grid, arr)
    return Snapshot(field, float(meta["t"]))


def write_snapshot(path: str | Path, field: PhysicalField | SpectralField, t: float) -> str:
    """Write a snapshot file and return its sha256 digest."""
    data = encode_snapshot(field, t)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_snapshot(path: str | Path) -> Snapshot:
    return decode_snapshot(Path(path).read_bytes())


def format_number(x: float) -> str:
    return repr(int(x)) if float(x).is_integer() and abs(x) < 2**53 else f"{x:.17g}"


def diagnostics_csv(rows: np.ndarray, columns: Iterable[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = list(columns)
    writer.writerow(columns)
    for row in rows:
        cells = [str(int(row[0]))] + [f"{v:.17g}" for v in row[1:]]
        writer.writerow(cells)
    return buf.getvalue()


def write_text(path: str | Path, text: str) -> str:
    data = text.encode("utf-8")
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__

    return {
        "fracscalar": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_manifest(directory: Path, config_echo: dict, seeds: dict, artifacts: dict[str, str], extra: dict | None = None) -> Path:
    manifest = {
        "format": "fracscalar-run-manifest",
        "config": config_echo,
        "seeds": seeds,
        "versions": versions(),
        "artifacts": dict(sorted(artifacts.items())),
    }
    if extra:
        manifest.update(extra)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, float):
        return repr(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
