"""Dataset persistence: tagged-column CSV and a compact binary column file.

Column tags (both formats):

* ``x0 .. x{dX-1}``  continuous X coordinates
* ``yc0 .. yc{dY-1}`` continuous Y coordinates
* ``y``               discrete Y label
* ``xd``              discrete X label (general mixed case)

Binary layout (all little-endian)::

    8 bytes   magic  b"MIESTCOL"
    uint32    version (= 1)
    uint64    n_rows
    uint32    n_cols
    n_cols x  { uint16 name_len, name_len bytes UTF-8 name }
    n_cols x  n_rows float64 values, column-major

Labels are stored as float64 and restored as integers when every value is
integral.
"""

from __future__ import annotations

import csv
import re
import struct
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from .core import Dataset, DegenerateDataset

__all__ = ["read_csv", "write_csv", "read_binary", "write_binary", "read_dataset",
           "write_dataset", "dataset_columns", "dataset_from_columns", "MAGIC"]

MAGIC = b"MIESTCOL"
VERSION = 1
_TAG = re.compile(r"^(x|yc)(\d+)$")

PathLike = Union[str, Path]


def dataset_columns(data: Dataset) -> Dict[str, np.ndarray]:
    """Ordered ``{tag: column}`` mapping in the canonical column order."""
    cols: Dict[str, np.ndarray] = {}
    if data.x_cont is not None:
        for j in range(data.d_x):
            cols[f"x{j}"] = data.x_cont[:, j]
    if data.y_cont is not None:
        for j in range(data.d_y):
            cols[f"yc{j}"] = data.y_cont[:, j]
    if data.y_disc is not None:
        cols["y"] = data.y_disc
    if data.x_disc is not None:
        cols["xd"] = data.x_disc
    return cols


def _labels(values) -> np.ndarray:
    try:
        f = np.asarray(values, dtype=np.float64)
    except ValueError:
        return np.asarray(values, dtype=object).astype(str)
    if np.all(np.isfinite(f)) and np.all(f == np.round(f)):
        return f.astype(np.int64)
    return f


def dataset_from_columns(cols: Dict[str, object]) -> Dataset:
    """Build a ``Dataset`` from tagged columns; unknown tags are an error."""
    xs: Dict[int, np.ndarray] = {}
    ys: Dict[int, np.ndarray] = {}
    y_disc = x_disc = None
    for name, values in cols.items():
        m = _TAG.match(name)
        if m:
            try:
                arr = np.asarray(values, dtype=np.float64)
            except ValueError as exc:
                raise DegenerateDataset(f"column {name!r} is not numeric") from exc
            (xs if m.group(1) == "x" else ys)[int(m.group(2))] = arr
        elif name == "y":
            y_disc = _labels(values)
        elif name == "xd":
            x_disc = _labels(values)
        else:
            raise DegenerateDataset(f"unknown column tag {name!r}")

    def stack(parts, prefix):
        if not parts:
            return None
        if sorted(parts) != list(range(len(parts))):
            raise DegenerateDataset(f"{prefix} columns must be numbered 0..{len(parts) - 1}")
        return np.column_stack([parts[j] for j in range(len(parts))])

    return Dataset(x_cont=stack(xs, "x"), y_cont=stack(ys, "yc"),
                   y_disc=y_disc, x_disc=x_disc)


def write_csv(data: Dataset, path: PathLike) -> None:
    cols = dataset_columns(data)
    names = list(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(data.n):
            w.writerow([_fmt(cols[c][i]) for c in names])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.generic):
        return str(v.item())
    return str(v)


def read_csv(path: PathLike) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DegenerateDataset(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if len(set(header)) != len(header):
        raise DegenerateDataset(f"{path}: duplicate column names")
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DegenerateDataset(f"{path}:{k}: expected {len(header)} fields, got {len(r)}")
    cols = {name: [r[j].strip() for r in body] for j, name in enumerate(header)}
    return dataset_from_columns(cols)


def write_binary(data: Dataset, path: PathLike) -> None:
    cols = dataset_columns(data)
    out: List[bytes] = [MAGIC, struct.pack("<IQI", VERSION, data.n, len(cols))]
    for name, values in cols.items():
        try:
            np.asarray(values, dtype=np.float64)
        except ValueError as exc:
            raise DegenerateDataset(f"column {name!r} has non-numeric labels; "
                                    "use CSV") from exc
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
    for values in cols.values():
        out.append(np.asarray(values, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(out))


def read_binary(path: PathLike) -> Dataset:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise DegenerateDataset(f"{path}: bad magic")
    try:
        version, n_rows, n_cols = struct.unpack_from("<IQI", buf, 8)
        if version != VERSION:
            raise DegenerateDataset(f"{path}: unsupported version {version}")
        pos = 8 + struct.calcsize("<IQI")
        names = []
        for _ in range(n_cols):
            (k,) = struct.unpack_from("<H", buf, pos)
            names.append(buf[pos + 2:pos + 2 + k].decode("utf-8"))
            pos += 2 + k
    except struct.error as exc:
        raise DegenerateDataset(f"{path}: truncated header") from exc
    need = pos + 8 * n_rows * n_cols
    if len(buf) != need:
        raise DegenerateDataset(f"{path}: expected {need} bytes, found {len(buf)}")
    block = np.frombuffer(buf, dtype="<f8", count=n_rows * n_cols, offset=pos)
    block = block.reshape(n_cols, n_rows).astype(np.float64)
    return dataset_from_columns({name: block[j] for j, name in enumerate(names)})


def read_dataset(path: PathLike) -> Dataset:
    """Dispatch on the magic bytes: binary column file or CSV."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    return read_binary(path) if head == MAGIC else read_csv(path)


def write_dataset(data: Dataset, path: PathLike, fmt: str = "csv") -> None:
    if fmt == "csv":
        write_csv(data, path)
    elif fmt == "bin":
        write_binary(data, path)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
