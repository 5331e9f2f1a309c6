"""Dataset files and result tables.

Binary datasets: ``b"RPTL"``, ``u32`` version, ``u64`` rows, ``u64`` cols,
then row-major little-endian float64. CSV datasets: a header
``x0,...,x{D-1}`` then one point per line.
"""
import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetParseError",
    "MAGIC",
    "FORMAT_VERSION",
    "write_dataset",
    "load_dataset",
    "format_value",
    "write_results_csv",
    "read_results_csv",
    "write_summary",
]

MAGIC = b"RPTL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class DatasetParseError(ValueError):
    """Malformed dataset file. ``line`` is 1-based (0 for binary headers)."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _is_csv(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "bin"):
            raise ValueError(f"unknown dataset format {fmt!r}")
        return fmt == "csv"
    return Path(path).suffix.lower() == ".csv"


def write_dataset(path, points, fmt=None):
    """Write ``points`` as binary (default) or CSV (``.csv`` suffix or ``fmt="csv"``)."""
    pts = np.ascontiguousarray(points, dtype="<f8")
    if pts.ndim != 2:
        raise ValueError("points must be 2-D")
    path = Path(path)
    if _is_csv(path, fmt):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{j}" for j in range(pts.shape[1])])
            for row in pts:
                w.writerow([repr(float(v)) for v in row])
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, pts.shape[0], pts.shape[1]))
        fh.write(pts.tobytes())


def _load_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetParseError(path, 0, "file shorter than header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetParseError(path, 0, f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetParseError(path, 0, f"unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * rows * cols:
        raise DatasetParseError(path, 0, f"expected {rows}x{cols} doubles, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def _load_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetParseError(path, 1, "empty file") from None
        cols = len(header)
        if cols == 0 or header != [f"x{j}" for j in range(cols)]:
            raise DatasetParseError(path, 1, "header must be x0,...,x{D-1}")
        rows = []
        for row in reader:
            line = reader.line_num
            if len(row) != cols:
                raise DatasetParseError(path, line, f"expected {cols} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DatasetParseError(path, line, str(exc)) from None
    return np.array(rows, dtype=np.float64).reshape(len(rows), cols)


def load_dataset(path, fmt=None):
    """Read a dataset written by :func:`write_dataset`."""
    if _is_csv(path, fmt):
        return _load_csv(path)
    return _load_binary(path)


def format_value(v):
    """Render a cell: ``repr`` for floats (round-trips exactly), empty for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_results_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row.get(c)) for c in columns])


def read_results_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
