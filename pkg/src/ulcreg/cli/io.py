"""CSV readers and writers for points, catalogs, partitions and grid evaluations.

All files are UTF-8 with a header row, comma separators and '.' decimals.
Floats are written with ``repr`` (shortest string that round-trips exactly).
"""

from __future__ import annotations

import csv
import math
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from ..errors import EmptyDataset, LengthMismatch, MalformedRow, MissingColumn, UlcError
from ..partition import Partition
from ..sample import Box, DesignSample, Lattice

CATALOG_COLUMNS = ("longitude", "latitude", "mag")
_RANGES = {"longitude": (-180.0, 360.0), "latitude": (-90.0, 90.0)}
BBOX_PAD = 1e-9


def _fmt(x: float) -> str:
    return repr(float(x))


def bounding_box(points: NDArray, pad: float = BBOX_PAD) -> Box:
    return Box(points.min(axis=0) - pad, points.max(axis=0) + pad)


def _read_rows(path, wanted: Sequence[str]):
    """Yield (line number, floats) for the ``wanted`` columns; header is line 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        missing = [c for c in wanted if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        cols = [header.index(c) for c in wanted]
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
            vals = []
            for c, name in zip(cols, wanted):
                try:
                    vals.append(float(row[c]))
                except ValueError:
                    raise MalformedRow(line, f"{name}={row[c]!r} is not a number") from None
            yield line, vals


def load_csv_dataset(
    path,
    coords: Sequence[str] = CATALOG_COLUMNS[:2],
    response: str | None = CATALOG_COLUMNS[2],
    domain: Box | None = None,
) -> DesignSample:
    """Read design points (``coords`` columns) and responses (``response`` column).

    Longitude and latitude columns are range-checked; every value must be
    finite.  The domain defaults to the padded bounding box of the points.
    """
    wanted = list(coords) + ([response] if response else [])
    rows = []
    for line, vals in _read_rows(path, wanted):
        for name, v in zip(wanted, vals):
            if not math.isfinite(v):
                raise MalformedRow(line, f"{name}={v} is not finite")
            lo, hi = _RANGES.get(name, (-math.inf, math.inf))
            if not lo <= v <= hi:
                raise MalformedRow(line, f"{name}={v} outside [{lo}, {hi}]")
        rows.append(vals)
    if not rows:
        raise EmptyDataset(f"{path} has no data rows")
    data = np.asarray(rows, dtype=float)
    pts = data[:, : len(coords)]
    y = data[:, len(coords)] if response else None
    return DesignSample(pts, domain if domain is not None else bounding_box(pts), y)


def write_catalog_csv(rows: NDArray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CATALOG_COLUMNS)
        for lon, lat, mag in rows:
            w.writerow([_fmt(lon), _fmt(lat), _fmt(mag)])


def point_columns(k: int) -> list[str]:
    return [f"x{j + 1}" for j in range(k)]


def write_points_csv(sample: DesignSample, path) -> None:
    """Columns ``x1..xk`` and ``y`` when responses are present."""
    cols = point_columns(sample.dim) + (["y"] if sample.responses is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(sample.n):
            row = [_fmt(v) for v in sample.points[i]]
            if sample.responses is not None:
                row.append(_fmt(sample.responses[i]))
            w.writerow(row)


def read_points_csv(path, domain: Box | None = None) -> DesignSample:
    """Read an ``x1..xk[,y]`` file."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    if not header:
        raise EmptyDataset(f"{path} is empty")
    k = 0
    while f"x{k + 1}" in header:
        k += 1
    if k == 0:
        raise MissingColumn(f"{path}: no x1 column")
    return load_csv_dataset(path, point_columns(k), "y" if "y" in header else None, domain)


def write_partition_csv(partition: Partition, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["owner", "measure", "diameter"])
        for i in range(partition.n):
            w.writerow([i, _fmt(partition.measures[i]), _fmt(partition.diameters[i])])


def export_grid_csv(matrix, grid: Lattice, path) -> None:
    """Write ``x,y,value`` rows; ``y`` is the outer loop and ``x`` the inner one.

    ``matrix`` has shape ``grid.shape`` = ``(n_y, n_x)``, so rows follow its
    row-major order.
    """
    m = np.asarray(matrix, dtype=float)
    if grid.domain.dim != 2:
        raise UlcError("grid export handles two-dimensional lattices")
    if m.shape != grid.shape:
        raise LengthMismatch(f"matrix shape {m.shape} does not match grid shape {grid.shape}")
    xs, ys = grid.axes()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for i, yv in enumerate(ys):
            for j, xv in enumerate(xs):
                w.writerow([_fmt(xv), _fmt(yv), _fmt(m[i, j])])


def read_grid_csv(path) -> tuple[NDArray, NDArray, NDArray]:
    """Inverse of :func:`export_grid_csv`: ``(x axis, y axis, matrix)``."""
    rows = np.array([vals for _, vals in _read_rows(path, ["x", "y", "value"])], dtype=float)
    if rows.size == 0:
        raise EmptyDataset(f"{path} has no data rows")
    xs = rows[rows[:, 1] == rows[0, 1], 0]
    ys = rows[:: xs.size, 1]
    if xs.size * ys.size != rows.shape[0]:
        raise UlcError(f"{path} is not a complete rectangular grid")
    return xs, ys, rows[:, 2].reshape(ys.size, xs.size)
