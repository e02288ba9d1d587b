"""File formats: field CSV (x,re,im), trajectory JSONL, histogram CSV,
and canonical JSON reports.

Floats are written with 17 significant digits so a write/read/write cycle
is byte-identical. Reports are serialized with sorted keys and no
timestamps, keeping outputs reproducible from (config, seed) alone.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from .ensemble import Ensemble
from .errors import ValidationError
from .lattice import PhasedTrajectory, SpaceTimeGrid, Trajectory, WaveFunctionField

PathLike = Union[str, Path]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def field_to_csv(field: WaveFunctionField) -> str:
    x = field.grid.cell_centers()
    lines = ["x,re,im"]
    for xi, a in zip(x, field.amplitudes):
        lines.append(f"{_fmt(xi)},{_fmt(a.real)},{_fmt(a.imag)}")
    return "\n".join(lines) + "\n"


def write_field_csv(field: WaveFunctionField, path: PathLike) -> None:
    Path(path).write_text(field_to_csv(field), encoding="utf-8")


def read_field_csv(path: PathLike, grid: SpaceTimeGrid,
                   time_index: int = 0) -> WaveFunctionField:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0].strip() != "x,re,im":
        raise ValidationError(f"{path}: expected header 'x,re,im'")
    rows = [ln.split(",") for ln in lines[1:]]
    if len(rows) != grid.n_x:
        raise ValidationError(
            f"{path}: {len(rows)} rows for a grid with {grid.n_x} cells")
    amps = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    return WaveFunctionField(grid, time_index, amps)


def ensemble_to_jsonl(ensemble: Ensemble) -> str:
    lines = []
    for m in ensemble.members:
        lines.append(json.dumps({
            "id": int(m.id),
            "positions": [int(p) for p in m.trajectory.positions],
            "phases": [float(p) for p in m.phases],
            "weight_re": float(m.amplitude_weight.real),
            "weight_im": float(m.amplitude_weight.imag),
        }, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def write_ensemble_jsonl(ensemble: Ensemble, path: PathLike) -> None:
    Path(path).write_text(ensemble_to_jsonl(ensemble), encoding="utf-8")


def read_ensemble_jsonl(path: PathLike, grid: SpaceTimeGrid,
                        provenance: Optional[Dict] = None) -> Ensemble:
    members = []
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        ln = ln.strip()
        if not ln:
            continue
        try:
            rec = json.loads(ln)
            traj = Trajectory(int(rec["id"]), np.asarray(rec["positions"]))
            member = PhasedTrajectory(
                traj, np.asarray(rec["phases"], dtype=float),
                complex(rec["weight_re"], rec["weight_im"]))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"{path}: bad trajectory record: {exc}") from exc
        members.append(member)
    return Ensemble(grid, tuple(members),
                    provenance if provenance is not None else {"source": str(path)})


def histogram_to_csv(x: np.ndarray, counts: np.ndarray) -> str:
    lines = ["x,count"]
    for xi, c in zip(x, counts):
        lines.append(f"{_fmt(xi)},{int(c)}")
    return "\n".join(lines) + "\n"


def write_histogram_csv(x: np.ndarray, counts: np.ndarray, path: PathLike) -> None:
    Path(path).write_text(histogram_to_csv(x, counts), encoding="utf-8")


def jsonable(obj):
    """Recursively convert numpy scalars/arrays for json serialization."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_to_json(report: Dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def write_json_report(report: Dict, path: PathLike) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")


def write_meta_sidecar(out_path: PathLike, meta: Dict) -> Path:
    """Provenance sidecar for CSV/JSONL outputs (they carry no free-form
    fields of their own)."""
    p = Path(str(out_path) + ".meta.json")
    p.write_text(report_to_json(meta), encoding="utf-8")
    return p
