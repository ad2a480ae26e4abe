"""Field and table files.

1D fields are CSV with columns ``x, re, im``.  2D fields are a raw
row-major ``complex128`` file (``.bin``) next to a two-column CSV header
(``.csv``) holding ``key,value`` metadata.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .grid import Grid, WaveField

__all__ = ["write_field", "read_field", "write_json", "append_summary", "write_trajectory_csv",
           "write_amplitudes_csv"]


def _with_ext(path: Path, ext: str) -> Path:
    # names such as "field_a1.5_e6" contain dots, so never use with_suffix on the stem
    if path.suffix in (".csv", ".bin"):
        path = path.with_suffix("")
    return path.with_name(path.name + ext)


def write_field(field: WaveField, path) -> Path:
    """Write ``field``; returns the path of the CSV part."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if field.dim == 1:
        path = _with_ext(path, ".csv")
        x = field.grid.axes[0]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re", "im"])
            for xi, v in zip(x, field.values):
                w.writerow([repr(float(xi)), repr(float(v.real)), repr(float(v.imag))])
        return path
    header = _with_ext(path, ".csv")
    binary = _with_ext(path, ".bin")
    np.ascontiguousarray(field.values, dtype="<c16").tofile(binary)
    with open(header, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        w.writerow(["dims", field.dim])
        w.writerow(["n", " ".join(str(k) for k in field.grid.n)])
        w.writerow(["box", " ".join(f"{a!r} {b!r}" for a, b in field.grid.box)])
        w.writerow(["dtype", "complex128-le"])
        w.writerow(["layout", "row-major"])
        w.writerow(["data", binary.name])
    return header


def read_field(path) -> WaveField:
    path = _with_ext(Path(path), ".csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] == ["x", "re", "im"]:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        x = data[:, 0]
        h = x[1] - x[0]
        grid = Grid(((x[0], x[0] + h * len(x)),), (len(x),))
        return WaveField(grid, data[:, 1] + 1j * data[:, 2])
    meta = dict(rows[1:])
    n = tuple(int(k) for k in meta["n"].split())
    b = [float(v) for v in meta["box"].split()]
    grid = Grid(tuple((b[2 * i], b[2 * i + 1]) for i in range(len(n))), n)
    values = np.fromfile(path.parent / meta["data"], dtype="<c16").reshape(n)
    return WaveField(grid, values)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
    return path


def append_summary(entry: dict, path) -> Path:
    """Append ``entry`` to the ``runs`` list of a summary JSON file."""
    path = Path(path)
    data = {"runs": []}
    if path.exists():
        with open(path) as fh:
            data = json.load(fh)
    data.setdefault("runs", []).append(_jsonable(entry))
    return write_json(data, path)


def write_trajectory_csv(rows, path) -> Path:
    """Rows of ``(t, Q..., P..., S, re A, im A, det Z, defect)``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    d = (len(rows[0]) - 6) // 2 if rows else 1
    names = ["t"] + [f"Q{i+1}" for i in range(d)] + [f"P{i+1}" for i in range(d)] + \
        ["S", "re_A", "im_A", "det_Z", "symplectic_defect"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows(rows)
    return path


def write_amplitudes_csv(q, p, A, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = q.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"q{i+1}" for i in range(d)] + [f"p{i+1}" for i in range(d)] + ["abs_A"])
        for qi, pi, a in zip(q, p, np.abs(A)):
            w.writerow(list(qi) + list(pi) + [a])
    return path
