"""Writers: legacy ASCII VTK (v2.0), CSV with 17 significant digits, JSON reports."""
import csv
import json
import math
from pathlib import Path

import numpy as np

VTK_TRIANGLE = 5
VTK_POLY_LINE = 4


def fmt(x):
    """Round-trip float formatting; ints and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def _vals(a):
    return " ".join(f"{float(v):.17g}" for v in a)


def write_vtk_mesh(path, mesh, point_data=None, cell_data=None, title="topolig"):
    """Unstructured grid with scalar (n,) or 2-vector (n, 2) fields."""
    lines = ["# vtk DataFile Version 2.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    for kind, data, n in (("POINT_DATA", point_data, mesh.n_vertices), ("CELL_DATA", cell_data, nt)):
        if not data:
            continue
        lines.append(f"{kind} {n}")
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines += [f"{a:.17g} {b:.17g} 0" for a, b in arr]
            else:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [f"{v:.17g}" for v in arr]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_vtk_polylines(path, polylines, values=None, title="topolig bars"):
    """Polylines (each an (k, 2) array) as POLYDATA with an optional cell scalar."""
    pts = [np.asarray(p, dtype=float).reshape(-1, 2) for p in polylines]
    npts = sum(len(p) for p in pts)
    lines = ["# vtk DataFile Version 2.0", title[:255], "ASCII", "DATASET POLYDATA", f"POINTS {npts} double"]
    for p in pts:
        lines += [f"{x:.17g} {y:.17g} 0" for x, y in p]
    lines.append(f"LINES {len(pts)} {sum(len(p) + 1 for p in pts)}")
    off = 0
    for p in pts:
        lines.append(" ".join([str(len(p))] + [str(off + k) for k in range(len(p))]))
        off += len(p)
    if values is not None and len(pts):
        lines += [f"CELL_DATA {len(pts)}", "SCALARS value double 1", "LOOKUP_TABLE default"]
        lines += [f"{float(v):.17g}" for v in values]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
