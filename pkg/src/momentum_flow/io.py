"""CSV / JSON artifact I/O. Every written artifact gets a ``.meta.json`` sidecar
or an embedded ``meta`` block carrying the resolved config and seed."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .metrics import PointCloud

FLOAT_FMT = "%.17g"


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_meta(path, meta: dict) -> Path:
    return write_json(sidecar_path(path), meta)


def _write_rows(path, header: list[str], rows: np.ndarray, int_cols: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([str(int(v)) for v in row[:int_cols]] + [FLOAT_FMT % v for v in row[int_cols:]])
    return path


def write_points(path, cloud: PointCloud | np.ndarray, meta: dict | None = None) -> Path:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(cloud)
    header = [f"dim{i}" for i in range(pts.shape[1])]
    out = _write_rows(path, header, pts)
    if meta is not None:
        write_meta(out, meta)
    return out


def read_points(path, name: str | None = None) -> PointCloud:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such point file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not all(h.startswith("dim") for h in header):
            raise ValueError(f"{path}: expected header dim0,dim1,...")
        rows = [[float(v) for v in row] for row in reader if row]
    pts = np.asarray(rows, dtype=np.float64).reshape(-1, len(header))
    return PointCloud(pts, name=name or path.stem)


def write_loss_curve(path, losses, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss"])
        for it, loss in losses:
            w.writerow([it, FLOAT_FMT % loss])
    if meta is not None:
        write_meta(path, meta)
    return path


def write_forward_trajectories(path, anchors: np.ndarray, meta: dict | None = None) -> Path:
    """One row per anchor: trajectory id, t, coordinates. ``anchors`` is (n, T+1, d)."""
    anchors = np.asarray(anchors)
    n, T1, d = anchors.shape
    ids = np.repeat(np.arange(n), T1)
    ts = np.tile(np.arange(T1), n)
    rows = np.column_stack([ids, ts, anchors.reshape(-1, d)])
    out = _write_rows(path, ["trajectory", "t"] + [f"dim{i}" for i in range(d)], rows, int_cols=2)
    if meta is not None:
        write_meta(out, meta)
    return out


def reverse_path_coordinates(T: int, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """(t, m) labels for the recorded reverse path points z_T ... z_0."""
    j = np.arange(T * steps + 1)
    t = T - np.minimum(j // steps, T - 1)
    m = 1.0 - (j - (T - t) * steps) / steps
    return t, m


def write_reverse_trajectories(path, path_points: np.ndarray, T: int, steps: int, meta: dict | None = None) -> Path:
    """One row per recorded state: sample id, sub-path t, m, coordinates."""
    n, J, d = path_points.shape
    t, m = reverse_path_coordinates(T, steps)
    rows = np.column_stack([
        np.repeat(np.arange(n), J),
        np.tile(t, n),
        np.tile(m, n),
        path_points.reshape(-1, d),
    ])
    out = _write_rows(path, ["sample", "t", "m"] + [f"dim{i}" for i in range(d)], rows, int_cols=2)
    if meta is not None:
        write_meta(out, meta)
    return out


def append_jsonl(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path
