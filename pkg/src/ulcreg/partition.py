"""Partitions of the design domain into one cell per design point.

Every construction returns a :class:`Partition` whose ``measures`` are the
cell volumes used as estimator weights and whose ``delta_n`` is the largest
sup-norm diameter of a cell taken together with its owning point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from . import _clip
from .errors import DomainMismatch, DuplicatePoints, SplitTie, WrongDimension
from .sample import Box, DesignSample

Method = Literal["voronoi2d", "median", "spacings1d", "voronoi1d"]

# candidate neighbours handed to the clipping kernel before it falls back to a full scan
_NEIGHBOURS = 32
_DUP_TOL = 1e-12


@dataclass(frozen=True)
class Cell:
    """One partition element.

    ``geometry`` is a ``(2, k)`` array ``[lo, hi]`` for box cells and an
    ``(m, 2)`` vertex array (counter-clockwise) for polygon cells.
    """

    owner_index: int
    kind: Literal["box", "polygon"]
    geometry: NDArray[np.float64]
    measure: float
    diameter_with_site: float

    def vertices(self) -> NDArray[np.float64]:
        if self.kind == "polygon":
            return self.geometry
        lo, hi = self.geometry
        k = lo.size
        bits = (np.arange(2**k)[:, None] >> np.arange(k)) & 1
        return np.where(bits == 1, hi, lo)

    def contains(self, point, tol: float = 1e-12) -> bool:
        p = np.asarray(point, dtype=float)
        if self.kind == "box":
            lo, hi = self.geometry
            return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))
        v = self.geometry
        w = np.roll(v, -1, axis=0)
        cross = (w[:, 0] - v[:, 0]) * (p[1] - v[:, 1]) - (w[:, 1] - v[:, 1]) * (p[0] - v[:, 0])
        return bool(np.all(cross >= -tol))


@dataclass(frozen=True, eq=False)
class Partition:
    """Cells indexed like the design points that own them."""

    method: Method
    domain: Box
    sites: NDArray[np.float64]
    measures: NDArray[np.float64]
    diameters: NDArray[np.float64]
    kinds: tuple
    geometries: tuple

    def __post_init__(self):
        for name in ("sites", "measures", "diameters"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.measures.size

    @property
    def delta_n(self) -> float:
        return float(self.diameters.max())

    @property
    def cells(self) -> list[Cell]:
        return [self.cell(i) for i in range(self.n)]

    def cell(self, i: int) -> Cell:
        return Cell(
            owner_index=i,
            kind=self.kinds[i],
            geometry=self.geometries[i],
            measure=float(self.measures[i]),
            diameter_with_site=float(self.diameters[i]),
        )

    def with_measures(self, measures) -> "Partition":
        return Partition(
            self.method, self.domain, self.sites, measures, self.diameters,
            self.kinds, self.geometries,
        )


def _check_distinct(points: NDArray) -> None:
    tree = cKDTree(points)
    pairs = tree.query_pairs(_DUP_TOL, p=np.inf, output_type="ndarray")
    if len(pairs):
        i, j = pairs[0]
        raise DuplicatePoints(f"design points {i} and {j} coincide")


def partition_voronoi_2d(sample: DesignSample) -> Partition:
    """Voronoi cells clipped to the rectangular domain.

    Each cell starts as the domain rectangle and is cut by the perpendicular
    bisector between its site and each neighbouring site.  Bisectors use the
    Euclidean metric; diameters are measured in the sup-norm.
    """
    if sample.dim != 2:
        raise WrongDimension(f"Voronoi partition needs k=2, got k={sample.dim}")
    pts = np.ascontiguousarray(sample.points, dtype=float)
    n = pts.shape[0]
    _check_distinct(pts)
    m = min(n - 1, _NEIGHBOURS)
    if m > 0:
        dist, idx = cKDTree(pts).query(pts, k=m + 1)
        nbr = np.ascontiguousarray(idx[:, 1:], dtype=np.int64)
        nbr_dist = np.ascontiguousarray(dist[:, 1:])
    else:
        nbr = np.zeros((n, 0), dtype=np.int64)
        nbr_dist = np.zeros((n, 0))
    lo = np.ascontiguousarray(sample.domain.lo)
    hi = np.ascontiguousarray(sample.domain.hi)
    vx, vy, offsets = _clip.voronoi_cells(pts, lo, hi, nbr, nbr_dist)
    area, diam = _clip.polygon_stats(vx, vy, offsets, pts)
    verts = np.column_stack([vx, vy])
    geoms = tuple(verts[offsets[i]:offsets[i + 1]] for i in range(n))
    return Partition("voronoi2d", sample.domain, pts, area, diam, ("polygon",) * n, geoms)


def _split_axis(lo: NDArray, hi: NDArray, first: bool) -> int:
    if first:
        return 0
    edges = hi - lo
    if edges.size == 2:
        # width > height splits the first axis, otherwise the second
        return 0 if edges[0] > edges[1] else 1
    return int(np.argmax(edges))


def _box_diameter(lo: NDArray, hi: NDArray, site: NDArray) -> float:
    return float(np.max(np.maximum(hi, site) - np.minimum(lo, site)))


def partition_median(sample: DesignSample) -> Partition:
    """Recursive coordinate-wise median boxes.

    The first cut is always along the first coordinate.  Later cuts go along
    the longest edge of the current box (for two dimensions: the first axis
    only when the box is strictly wider than tall).  A cut sits at the midpoint
    between the ``floor(m/2)``-th and next order statistic of the ``m`` points
    inside the box.
    """
    pts = np.asarray(sample.points, dtype=float)
    n, k = pts.shape
    los = np.empty((n, k))
    his = np.empty((n, k))
    stack = [(np.arange(n), sample.domain.lo.copy(), sample.domain.hi.copy(), True)]
    while stack:
        idx, lo, hi, first = stack.pop()
        if idx.size == 1:
            los[idx[0]] = lo
            his[idx[0]] = hi
            continue
        axis = _split_axis(lo, hi, first)
        vals = pts[idx, axis]
        h = idx.size // 2
        part = np.partition(vals, (h - 1, h))
        a, b = part[h - 1], part[h]
        if a == b:
            raise SplitTie(
                f"order statistics {h} and {h + 1} along axis {axis} coincide at {a}"
            )
        cut = 0.5 * (a + b)
        left = vals < cut
        lhi = hi.copy()
        lhi[axis] = cut
        rlo = lo.copy()
        rlo[axis] = cut
        stack.append((idx[~left], rlo, hi, False))
        stack.append((idx[left], lo, lhi, False))
    measures = np.prod(his - los, axis=1)
    diam = np.max(np.maximum(his, pts) - np.minimum(los, pts), axis=1)
    geoms = tuple(np.stack([los[i], his[i]]) for i in range(n))
    return Partition("median", sample.domain, pts, measures, diam, ("box",) * n, geoms)


def _check_1d(sample: DesignSample) -> NDArray:
    if sample.dim != 1:
        raise WrongDimension(f"1-d partition needs k=1, got k={sample.dim}")
    if sample.domain.lo[0] != 0.0 or sample.domain.hi[0] != 1.0:
        raise DomainMismatch("1-d spacing partitions are defined on [0, 1] only")
    x = sample.points[:, 0]
    xs = np.sort(x)
    if np.any(np.diff(xs) <= _DUP_TOL):
        raise DuplicatePoints("1-d design points must be pairwise distinct")
    return x


def _interval_partition(method, sample, left, right, site) -> Partition:
    n = site.size
    measures = right - left
    diam = np.maximum(right, site) - np.minimum(left, site)
    geoms = tuple(np.array([[left[i]], [right[i]]]) for i in range(n))
    return Partition(method, sample.domain, sample.points, measures, diam, ("box",) * n, geoms)


def partition_1d_spacings(sample: DesignSample) -> Partition:
    """Cells ``(X_(i-1), X_(i)]`` with ``X_(0) = 0``; the last gap up to 1 is left unassigned."""
    x = _check_1d(sample)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    prev = np.concatenate([[0.0], xs[:-1]])
    left = np.empty_like(x)
    right = np.empty_like(x)
    left[order] = prev
    right[order] = xs
    return _interval_partition("spacings1d", sample, left, right, x)


def partition_1d_voronoi(sample: DesignSample) -> Partition:
    """Midpoint cells ``((X_(i-1)+X_(i))/2, (X_(i)+X_(i+1))/2]`` with ``X_(0)=0``, ``X_(n+1)=1``."""
    x = _check_1d(sample)
    order = np.argsort(x, kind="stable")
    ext = np.concatenate([[0.0], x[order], [1.0]])
    mid = 0.5 * (ext[:-1] + ext[1:])
    left = np.empty_like(x)
    right = np.empty_like(x)
    left[order] = mid[:-1]
    right[order] = mid[1:]
    p = _interval_partition("voronoi1d", sample, left, right, x)
    # the cell measure is defined as (X_(i+1) - X_(i-1)) / 2
    measures = np.empty_like(x)
    measures[order] = 0.5 * (ext[2:] - ext[:-2])
    return p.with_measures(measures)


def max_cell_diameter(partition: Partition) -> float:
    """Largest sup-norm diameter of a cell together with its owning site."""
    return partition.delta_n


def brute_force_diameters(partition: Partition) -> NDArray[np.float64]:
    """Pairwise sup-norm scan over cell vertices plus site (reference implementation)."""
    out = np.empty(partition.n)
    for i, cell in enumerate(partition.cells):
        pts = np.vstack([cell.vertices(), partition.sites[i]])
        diff = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
        out[i] = diff.max()
    return out


BUILDERS = {
    "voronoi2d": partition_voronoi_2d,
    "median": partition_median,
    "spacings1d": partition_1d_spacings,
    "voronoi1d": partition_1d_voronoi,
}


def build_partition(sample: DesignSample, method: Method) -> Partition:
    return BUILDERS[method](sample)
