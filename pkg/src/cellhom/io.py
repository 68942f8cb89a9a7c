"""Reports and field files: JSON with 17 significant digits, CSV tables, binary fields, legacy VTK."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .core import Grid, SymField, VecField
from .material import HEADER, MAGIC, MicrostructureFormatError, read_header

SCHEMA = "cellhom/1"
SAMPLE = np.dtype("<f8")


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = "%.17g" % x
    # keep floats recognisable as floats
    if not any(c in s for c in ".eEn"):
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: keys in insertion order, every float with 17 significant digits."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

OSCILLATION_COLUMNS = ("n", "integral", "target", "error")
TRACE_COLUMNS = ("pair", "kind", "a", "b", "mismatch_1", "mismatch_2", "mismatch_3", "norm")


def write_oscillation_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(OSCILLATION_COLUMNS)
        for r in records:
            w.writerow([r.n, "%.17g" % r.integral, "%.17g" % r.target, "%.17g" % r.error])


def write_trace_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for rep in reports:
            for row in rep.rows():
                w.writerow(row[:4] + tuple("%.17g" % x for x in row[4:]))


# --------------------------------------------------------------------------
# Binary Gauss-point fields
# --------------------------------------------------------------------------
# 16-byte header (magic, u32 n1, n2, n3) then, for every element with i
# fastest, its 8 Gauss points in local order (xi1 fastest), each as six
# little-endian f64 Mandel components.

def _sample_offset(e_linear: int, q: int) -> int:
    return HEADER.size + (e_linear * 8 + q) * 6 * SAMPLE.itemsize


def write_field(path, field: SymField) -> None:
    n1, n2, n3 = field.grid.shape
    data = np.transpose(field.values, (2, 1, 0, 3, 4))  # k slowest, i fastest
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, n1, n2, n3))
        fh.write(np.ascontiguousarray(data, dtype=SAMPLE).tobytes())


def read_field(path, grid: Grid | None = None) -> SymField:
    """Read a Gauss-point field; the grid shape comes from the header unless ``grid`` is given."""
    buf = Path(path).read_bytes()
    try:
        n1, n2, n3 = read_header(buf, path)
    except MicrostructureFormatError as exc:
        raise MicrostructureFormatError(str(exc).replace("voxel", "sample")) from exc
    if grid is None:
        grid = Grid((n1, n2, n3))
    elif grid.shape != (n1, n2, n3):
        raise MicrostructureFormatError(f"{path}: header grid ({n1}, {n2}, {n3}) does not match expected {grid.shape}")
    count = n1 * n2 * n3 * 8
    expected = HEADER.size + count * 6 * SAMPLE.itemsize
    if len(buf) != expected:
        have = (len(buf) - HEADER.size) / (6 * SAMPLE.itemsize)
        raise MicrostructureFormatError(
            f"{path}: size mismatch: expected {expected} bytes ({count} samples of 48 bytes after the "
            f"{HEADER.size}-byte header), found {len(buf)} bytes ({have:g} samples); data ends at byte offset {len(buf)}"
        )
    raw = np.frombuffer(buf, dtype=SAMPLE, offset=HEADER.size).reshape(n3, n2, n1, 8, 6)
    bad = np.argwhere(~np.isfinite(raw))
    if len(bad):
        k, j, i, q, c = bad[0]
        e = (k * n2 + j) * n1 + i
        off = _sample_offset(int(e), int(q)) + int(c) * SAMPLE.itemsize
        raise MicrostructureFormatError(
            f"{path}: non-finite value at byte offset {off} (element ({i}, {j}, {k}), Gauss point {q}, component {c})"
        )
    return SymField(grid, np.transpose(raw, (2, 1, 0, 3, 4)))


# --------------------------------------------------------------------------
# Legacy VTK
# --------------------------------------------------------------------------

def write_vtk(path, grid: Grid, cell_fields=None, point_fields=None, title="cellhom field") -> None:
    """ASCII STRUCTURED_POINTS file on the reference cube.

    ``cell_fields`` maps names to SymFields (written as element means, six
    Mandel components) or integer phase arrays; ``point_fields`` maps names
    to VecFields. Spacing is that of the unit reference cube; the lattice
    matrix is recorded in the title line.
    """
    n1, n2, n3 = grid.shape
    lines = [
        "# vtk DataFile Version 3.0",
        f"{title}; lattice {list(map(list, grid.lattice.G))}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {n1 + 1} {n2 + 1} {n3 + 1}",
        "ORIGIN 0 0 0",
        f"SPACING {1.0 / n1!r} {1.0 / n2!r} {1.0 / n3!r}",
    ]

    def fortran(a):
        return np.transpose(a, (2, 1, 0) + tuple(range(3, a.ndim))).reshape((-1,) + a.shape[3:])

    if cell_fields:
        lines.append(f"CELL_DATA {n1 * n2 * n3}")
        for name, f in cell_fields.items():
            if isinstance(f, SymField):
                vals = fortran(f.values.mean(axis=3))
                for c in range(6):
                    lines += [f"SCALARS {name}_{c + 1} double 1", "LOOKUP_TABLE default"]
                    lines += ["%.17g" % x for x in vals[:, c]]
            else:
                lines += [f"SCALARS {name} int 1", "LOOKUP_TABLE default"]
                lines += [str(int(x)) for x in fortran(np.asarray(f))]
    if point_fields:
        lines.append(f"POINT_DATA {(n1 + 1) * (n2 + 1) * (n3 + 1)}")
        for name, v in point_fields.items():
            vals = v.values if isinstance(v, VecField) else np.asarray(v)
            idx = np.meshgrid(np.arange(n1 + 1), np.arange(n2 + 1), np.arange(n3 + 1), indexing="ij")
            full = fortran(vals[grid.wrap(*idx)])
            lines.append(f"VECTORS {name} double")
            lines += ["%.17g %.17g %.17g" % tuple(x) for x in full]
    Path(path).write_text("\n".join(lines) + "\n")
