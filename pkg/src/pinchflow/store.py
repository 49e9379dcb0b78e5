"""On-disk layout of a run directory.

::

    manifest.json
    snapshots/snap_0000.csv ...   one unscaled profile per file
    series/min_radius.csv         t, min u, argmin r per accepted step
    series/fit_series.csv         written by ``analyze``
    reports/<claim>.json          written by ``verify``
    reports/summary.txt
    plots/*.py                    written by ``plot``

Everything is written deterministically: sorted JSON keys, 17 significant
digits, no wall-clock data.
"""

from __future__ import annotations

import json
import math
import shutil
from pathlib import Path

import numpy as np

from pinchflow.config import RunConfig, from_dict, manifest_view
from pinchflow.errors import RunDataError
from pinchflow.frames import FlowGeometry, Frame, GridProfile
from pinchflow.solver import RunRecord

MANIFEST = "manifest.json"
FIT_COLUMNS = ("tau", "a", "b", "omega", "res_l2", "norm_w3", "norm_w2_grad", "norm_w1_hess")
MIN_RADIUS_COLUMNS = ("t", "u_min", "argmin_r")


def fmt(x) -> str:
    return "%.17g" % x


def jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(obj, path: Path):
    path.write_text(json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _nan(x):
    return float("nan") if x is None else float(x)


# -- snapshots ---------------------------------------------------------------


def write_snapshot(path: Path, p: GridProfile, g: FlowGeometry):
    lines = [f"# {p.frame.value}, {fmt(p.timestamp)}, {g.m}, {g.k}"]
    lines += [f"{fmt(r)},{fmt(u)}" for r, u in zip(p.radii, p.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_snapshot(path: Path) -> tuple:
    """Returns ``(profile, geometry)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    if not header.startswith("#"):
        raise RunDataError(f"{path}: missing snapshot header")
    try:
        frame, ts, m, k = (part.strip() for part in header[1:].split(","))
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise RunDataError(f"{path}: malformed snapshot ({exc})") from None
    prof = GridProfile(data[:, 0], data[:, 1], Frame(frame), float(ts))
    return prof, FlowGeometry(int(m), int(k))


def write_table(path: Path, columns, rows):
    lines = [",".join(columns)]
    lines += [",".join(fmt(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path: Path, columns) -> np.ndarray:
    if not path.is_file():
        raise RunDataError(f"missing series file {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != tuple(columns):
        raise RunDataError(f"{path}: unexpected columns {header}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).reshape(-1, len(columns))


# -- runs --------------------------------------------------------------------


def write_run(rec: RunRecord, cfg: RunConfig, run_dir) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    snap_dir = run_dir / "snapshots"
    if snap_dir.exists():
        shutil.rmtree(snap_dir)
    snap_dir.mkdir()
    (run_dir / "series").mkdir(exist_ok=True)
    names = []
    for i, snap in enumerate(rec.snapshots):
        name = f"snapshots/snap_{i:04d}.csv"
        write_snapshot(run_dir / name, snap, rec.geometry)
        names.append(name)
    write_table(run_dir / "series" / "min_radius.csv", MIN_RADIUS_COLUMNS, rec.min_radius_series)
    manifest = {
        "config": manifest_view(cfg),
        "config_hash": rec.config_hash,
        "status": rec.status,
        "t_star": rec.t_star,
        "t_star_uncertainty": rec.t_star_uncertainty,
        "time_origin": rec.time_origin,
        "steps": rec.steps,
        "degenerate": rec.degenerate,
        "snapshots": names,
        "series": {"min_radius": "series/min_radius.csv"},
    }
    path = run_dir / MANIFEST
    dump_json(manifest, path)
    return path


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        raise RunDataError(f"no run manifest at {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RunDataError(f"{path}: invalid JSON ({exc})") from None


def read_run(run_dir) -> tuple:
    """Load ``(RunRecord, RunConfig)`` from a run directory."""
    run_dir = Path(run_dir)
    man = read_manifest(run_dir)
    cfg = from_dict(man["config"])
    if not man["snapshots"]:
        raise RunDataError(f"{run_dir}: manifest lists no snapshots")
    snaps = []
    for name in man["snapshots"]:
        path = run_dir / name
        if not path.is_file():
            raise RunDataError(f"missing snapshot {path}")
        snaps.append(read_snapshot(path)[0])
    series = read_table(run_dir / man["series"]["min_radius"], MIN_RADIUS_COLUMNS)
    rec = RunRecord(config_hash=man["config_hash"], geometry=cfg.geometry, snapshots=snaps,
                    min_radius_series=series, status=man["status"],
                    t_star=_nan(man["t_star"]),
                    t_star_uncertainty=_nan(man["t_star_uncertainty"]),
                    time_origin=float(man["time_origin"]), degenerate=man["degenerate"],
                    steps=int(man["steps"]), solver=cfg.solver)
    return rec, cfg


# -- analysis products -------------------------------------------------------


def write_fit_series(path: Path, fits):
    rows = [(f.tau, f.a, f.b, f.window, f.residual_l2,
             f.norms["norm_w3"], f.norms["norm_w2_grad"], f.norms["norm_w1_hess"]) for f in fits]
    write_table(path, FIT_COLUMNS, rows)


def read_fit_series(path: Path) -> dict:
    data = read_table(Path(path), FIT_COLUMNS)
    return {name: data[:, i] for i, name in enumerate(FIT_COLUMNS)}


def write_reports(run_dir, reports, summary: str) -> list:
    out = Path(run_dir) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for rep in reports:
        path = out / f"{rep.claim}.json"
        dump_json(rep.to_dict(), path)
        paths.append(path)
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    return paths
