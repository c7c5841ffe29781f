"""Partition-weighted local-constant regression and the Nadaraya-Watson baseline.

A fitted model predicts

    f*(t) = sum_i Y_i K_eps(t - X_i) w_i / sum_i K_eps(t - X_i) w_i

with ``w_i`` the cell measures of a partition (``ulc`` mode) or all ones
(``nw`` mode).  A zero denominator yields 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from .errors import (
    CopyError,
    InsufficientCopies,
    LengthMismatch,
    NonpositiveBandwidth,
    UlcError,
)
from .kernels import KernelSpec
from .partition import Partition
from .sample import DesignSample, Lattice

Mode = Literal["ulc", "nw"]

# denominators below this count as zero
DENOM_FLOOR = 1e-300
_CHUNK = 4096


def neighbour_pairs(tree: cKDTree, queries: NDArray, radius: float, p: float):
    """(query index, design index) pairs within ``radius``, sorted by query then design index."""
    lists = tree.query_ball_point(queries, r=radius, p=p, return_sorted=True)
    counts = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(lists))
    qi = np.repeat(np.arange(len(lists)), counts)
    xj = np.concatenate(lists).astype(np.int64) if counts.sum() else np.zeros(0, np.int64)
    return qi, xj


def scaled_kernel_values(kernel: KernelSpec, eps: float, diff: NDArray) -> NDArray:
    """``K_eps(diff)`` row-wise, exactly zero outside the sup-norm ball of radius ``eps``."""
    vals = kernel.evaluate(diff / eps) * eps ** (-kernel.dim)
    return np.where(np.abs(diff).max(axis=1) > eps, 0.0, vals)


def support_distance(diff: NDArray, p: float) -> NDArray:
    """Row-wise distance in the kernel's support norm (2 or inf)."""
    if p == 2.0:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if p == np.inf:
        out = np.abs(diff[:, 0])
        for j in range(1, diff.shape[1]):
            np.maximum(out, np.abs(diff[:, j]), out=out)
        return out
    return np.linalg.norm(diff, ord=p, axis=1)


def pair_kernel_values(kernel: KernelSpec, eps: float, diff: NDArray, dist: NDArray) -> NDArray:
    """``K_eps(diff)`` given ``dist``, the support-norm length of each row of ``diff``.

    Radial and product kernels vanish on their own outside the window, so
    no separate sup-norm mask is needed for them.
    """
    scale = eps ** (-kernel.dim)
    if kernel.radial is not None:
        return kernel.radial(dist / eps) * scale
    if kernel.base is not None:
        out = kernel.base.pdf(diff[:, 0] / eps)
        for j in range(1, kernel.dim):
            out = out * kernel.base.pdf(diff[:, j] / eps)
        return out * scale
    return scaled_kernel_values(kernel, eps, diff)


def ratio(num: NDArray, den: NDArray) -> NDArray:
    # bincount over an empty window yields an integer array
    num = np.asarray(num, dtype=float)
    out = np.zeros_like(num)
    ok = den >= DENOM_FLOOR
    np.divide(num, den, out=out, where=ok)
    return out


@dataclass(frozen=True, eq=False)
class FittedLocalConstant:
    """Immutable local-constant model; see :func:`fit`."""

    sample: DesignSample
    weights: NDArray[np.float64]
    kernel: KernelSpec
    eps: float
    mode: Mode = "ulc"
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        if self.sample.responses is None:
            raise UlcError("fitting needs responses")
        w = np.asarray(self.weights, dtype=float).reshape(-1).copy()
        if w.size != self.sample.n:
            raise LengthMismatch(f"{self.sample.n} points but {w.size} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise UlcError("weights must be finite and nonnegative")
        if self.mode not in ("ulc", "nw"):
            raise UlcError(f"unknown mode {self.mode!r}")
        if self.mode == "nw" and np.any(w != 1.0):
            raise UlcError("nw mode requires unit weights")
        if not self.eps > 0:
            raise NonpositiveBandwidth(f"bandwidth must be positive, got {self.eps}")
        if self.kernel.dim != self.sample.dim:
            raise UlcError("kernel and design dimensions differ")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_tree", cKDTree(self.sample.points))

    def _window(self, t: NDArray):
        """Pairs and kernel-times-weight values ``a = K_eps(t - X_j) w_j``."""
        # slight over-reach keeps boundary points; the sup-norm mask trims them
        qi, xj = neighbour_pairs(self._tree, t, self.eps * (1 + 1e-12), self.kernel.support_norm)
        diff = t[qi] - self.sample.points[xj]
        dist = support_distance(diff, self.kernel.support_norm)
        a = pair_kernel_values(self.kernel, self.eps, diff, dist) * self.weights[xj]
        return qi, xj, a

    def predict(self, points) -> NDArray[np.float64]:
        pts = np.asarray(points, dtype=float).reshape(-1, self.sample.dim)
        out = np.empty(pts.shape[0])
        y = self.sample.responses
        for s in range(0, pts.shape[0], _CHUNK):
            t = pts[s:s + _CHUNK]
            qi, xj, a = self._window(t)
            num = np.bincount(qi, weights=a * y[xj], minlength=t.shape[0])
            den = np.bincount(qi, weights=a, minlength=t.shape[0])
            out[s:s + _CHUNK] = ratio(num, den)
        return out

    def evaluate(self, t) -> float:
        t = np.asarray(t, dtype=float).reshape(1, self.sample.dim)
        if not self.sample.domain.contains(t)[0]:
            warnings.warn("evaluation point lies outside the domain", stacklevel=2)
        return float(self.predict(t)[0])

    def evaluate_grid(self, grid: Lattice) -> NDArray[np.float64]:
        return self.predict(grid.points()).reshape(grid.shape)

    def window_mass(self, points) -> NDArray[np.float64]:
        """``J_{n,eps}(t) = sum_j K_eps(t - X_j) w_j`` at each point."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.sample.dim)
        qi, _, a = self._window(pts)
        return np.bincount(qi, weights=a, minlength=pts.shape[0]).astype(float)

    def window_weights(self, t) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        """Indices and values of the nonzero ``a_j = K_eps(t - X_j) w_j`` at one point."""
        t = np.asarray(t, dtype=float).reshape(1, self.sample.dim)
        _, xj, a = self._window(t)
        keep = a > 0
        return xj[keep], a[keep]


def fit(
    sample: DesignSample,
    weights: Partition | NDArray | None,
    kernel: KernelSpec,
    eps: float,
    mode: Mode = "ulc",
) -> FittedLocalConstant:
    """Bind a sample, weights, kernel and bandwidth into a model.

    ``weights`` may be a :class:`Partition` (its cell measures are used), an
    explicit array, or ``None`` for unit weights.
    """
    if isinstance(weights, Partition):
        w = weights.measures
    elif weights is None:
        w = np.ones(sample.n)
    else:
        w = np.asarray(weights, dtype=float)
    return FittedLocalConstant(sample, w, kernel, float(eps), mode)


def fit_nw(sample: DesignSample, kernel: KernelSpec, eps: float) -> FittedLocalConstant:
    return fit(sample, None, kernel, eps, mode="nw")


@dataclass(frozen=True)
class FunctionalPanel:
    """Independent noisy copies ``(sample_j, partition_j)`` of one random regression model."""

    copies: Sequence[tuple[DesignSample, Partition]]

    def __post_init__(self):
        if len(self.copies) < 1:
            raise InsufficientCopies("a panel needs at least one copy")
        dom = self.copies[0][0].domain
        for j, (s, p) in enumerate(self.copies):
            if s.domain != dom:
                raise UlcError(f"copy {j} has a different domain")
            if p.n != s.n:
                raise UlcError(f"copy {j}: partition size differs from sample size")

    @property
    def N(self) -> int:
        return len(self.copies)


def _copy_surfaces(panel: FunctionalPanel, kernel, eps, grid: Lattice) -> NDArray:
    nodes = grid.points()
    out = np.empty((panel.N, nodes.shape[0]))
    for j, (s, p) in enumerate(panel.copies):
        try:
            out[j] = fit(s, p, kernel, eps).predict(nodes)
        except UlcError as exc:
            raise CopyError(j, exc) from exc
    return out


def mean_function_estimate(panel: FunctionalPanel, kernel: KernelSpec, eps: float,
                           grid: Lattice) -> NDArray[np.float64]:
    """Pointwise average of the per-copy local-constant surfaces on ``grid``."""
    return _copy_surfaces(panel, kernel, eps, grid).mean(axis=0).reshape(grid.shape)


def second_moment_estimate(panel: FunctionalPanel, kernel: KernelSpec, eps: float,
                           grid: Lattice) -> NDArray[np.float64]:
    """``M*(t1, t2) = (1/N) sum_j f*_j(t1) f*_j(t2)`` over all pairs of flattened grid nodes."""
    v = _copy_surfaces(panel, kernel, eps, grid)
    m = v.T @ v / panel.N
    return 0.5 * (m + m.T)


def covariance_estimate(panel: FunctionalPanel, kernel: KernelSpec, eps: float,
                        grid: Lattice) -> NDArray[np.float64]:
    if panel.N < 2:
        raise InsufficientCopies("covariance estimation needs at least two copies")
    v = _copy_surfaces(panel, kernel, eps, grid)
    mean = v.mean(axis=0)
    m = v.T @ v / panel.N
    cov = m - np.outer(mean, mean)
    return 0.5 * (cov + cov.T)
