"""Core data containers: axis-aligned domains, design samples and lattices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import EmptyGrid, LengthMismatch, UlcError


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_k, hi_k]``."""

    lo: NDArray[np.float64]
    hi: NDArray[np.float64]

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise UlcError("box bounds must be equal-length 1-d sequences")
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(hi <= lo):
            raise UlcError(f"degenerate box bounds lo={lo}, hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, k: int) -> "Box":
        return cls(np.zeros(k), np.ones(k))

    @classmethod
    def symmetric(cls, k: int, half: float = 1.0) -> "Box":
        return cls(-half * np.ones(k), half * np.ones(k))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def edges(self) -> NDArray[np.float64]:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, points, tol: float = 0.0) -> NDArray[np.bool_]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def corners(self) -> NDArray[np.float64]:
        k = self.dim
        bits = (np.arange(2**k)[:, None] >> np.arange(k)) & 1
        return np.where(bits == 1, self.hi, self.lo)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(d["lo"], d["hi"])


@dataclass(frozen=True)
class DesignSample:
    """Design points ``X_i`` in a box domain, optionally with responses ``Y_i``."""

    points: NDArray[np.float64]
    domain: Box
    responses: NDArray[np.float64] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise UlcError("a design needs at least one point")
        if pts.shape[1] != self.domain.dim:
            raise UlcError(
                f"points have dimension {pts.shape[1]}, domain has {self.domain.dim}"
            )
        if not np.all(self.domain.contains(pts)):
            bad = int(np.flatnonzero(~self.domain.contains(pts))[0])
            raise UlcError(f"point {bad} lies outside the domain")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.responses is not None:
            y = np.asarray(self.responses, dtype=float).reshape(-1).copy()
            if y.size != pts.shape[0]:
                raise LengthMismatch(f"{pts.shape[0]} points but {y.size} responses")
            y.flags.writeable = False
            object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, index) -> "DesignSample":
        index = np.asarray(index)
        y = None if self.responses is None else self.responses[index]
        return DesignSample(self.points[index], self.domain, y)

    def with_responses(self, responses) -> "DesignSample":
        return DesignSample(self.points, self.domain, responses)


@dataclass(frozen=True)
class Lattice:
    """Uniform lattice over a box, endpoints included on every axis.

    Nodes are enumerated with the first axis varying fastest, so a 2-d
    lattice reshapes to an ``(n_y, n_x)`` matrix.
    """

    counts: tuple[int, ...]
    domain: Box = field(default_factory=lambda: Box.symmetric(2))

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(counts) != self.domain.dim:
            raise EmptyGrid("lattice counts do not match the domain dimension")
        if any(c < 1 for c in counts):
            raise EmptyGrid(f"lattice counts must be positive, got {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(reversed(self.counts))

    def axes(self) -> list[NDArray[np.float64]]:
        out = []
        for c, lo, hi in zip(self.counts, self.domain.lo, self.domain.hi):
            out.append(np.array([(lo + hi) / 2]) if c == 1 else np.linspace(lo, hi, c))
        return out

    def points(self) -> NDArray[np.float64]:
        grids = np.meshgrid(*self.axes()[::-1], indexing="ij")
        return np.column_stack([g.ravel() for g in grids[::-1]])
