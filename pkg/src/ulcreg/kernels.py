"""Compactly supported kernel densities on the unit ball and their scaled versions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import integrate
from scipy.stats import qmc

from .errors import InvalidBase, NonpositiveBandwidth

TRICUBE_CONST = 440.0 / (162.0 * math.pi)

# max |d/dr C(1 - r^3)^3| = 9C * max r^2 (1 - r^3)^2, attained at r^3 = 1/4;
# the Euclidean Lipschitz bound also bounds the coordinate-sum one
TRICUBE_LIPSCHITZ = 1.737


@dataclass(frozen=True)
class Base1D:
    """Symmetric univariate density on [-1, 1]."""

    name: str
    pdf: Callable[[NDArray], NDArray]
    cdf: Callable[[NDArray], NDArray]
    lipschitz: float
    sup: float
    lipschitz_at_edge: bool = True


def _uniform_pdf(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


def _uniform_cdf(u):
    return 0.5 * (np.clip(u, -1.0, 1.0) + 1.0)


def _triangular_pdf(u):
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(u, dtype=float)))


def _triangular_cdf(u):
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return np.where(u < 0, 0.5 * (1 + u) ** 2, 1.0 - 0.5 * (1 - u) ** 2)


def _epanechnikov_pdf(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _epanechnikov_cdf(u):
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return 0.5 + 0.75 * u - 0.25 * u**3


UNIFORM = Base1D("uniform", _uniform_pdf, _uniform_cdf, 0.0, 0.5, lipschitz_at_edge=False)
TRIANGULAR = Base1D("triangular", _triangular_pdf, _triangular_cdf, 1.0, 1.0)
EPANECHNIKOV = Base1D("epanechnikov", _epanechnikov_pdf, _epanechnikov_cdf, 1.5, 0.75)
BASES = {b.name: b for b in (UNIFORM, TRIANGULAR, EPANECHNIKOV)}


@dataclass(frozen=True)
class KernelSpec:
    """A kernel density ``K`` on R^k vanishing outside the unit sup-norm ball.

    ``support_norm`` is the norm whose unit ball contains the support
    (2 for radial kernels, ``inf`` for product kernels); it only serves to
    speed up neighbour searches.
    """

    dim: int
    func: Callable[[NDArray], NDArray] = field(repr=False)
    lipschitz_L: float
    label: str
    support_norm: float = np.inf
    base: Base1D | None = field(default=None, repr=False)
    non_lipschitz_edge: bool = False
    sup_value: float = 1.0
    # K(s) = radial(|s|_2) for radial kernels; vectorised over radii
    radial: Callable[[NDArray], NDArray] | None = field(default=None, repr=False)

    def evaluate(self, s) -> NDArray[np.float64] | float:
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0 or (s.ndim == 1 and self.dim > 1)
        pts = s.reshape(-1, self.dim)
        out = np.asarray(self.func(pts), dtype=float)
        out = np.where(np.abs(pts).max(axis=1) > 1.0, 0.0, out)
        return float(out[0]) if scalar else out

    __call__ = evaluate


def _tricube(pts: NDArray) -> NDArray:
    r = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    return TRICUBE_CONST * np.maximum(0.0, 1.0 - r**3) ** 3


def _tricube_profile(r):
    """Radial profile; accepts scalars or arrays of radii."""
    return TRICUBE_CONST * np.maximum(0.0, 1.0 - r * r * r) ** 3


def make_tricubic() -> KernelSpec:
    """``K(x, y) = 440/(162 pi) * max(0, (1 - (x^2 + y^2)^(3/2))^3)``."""
    return KernelSpec(
        dim=2,
        func=_tricube,
        lipschitz_L=TRICUBE_LIPSCHITZ,
        label="tricubic2d",
        support_norm=2.0,
        sup_value=TRICUBE_CONST,
        radial=_tricube_profile,
    )


def make_product_kernel(base: Base1D, k: int) -> KernelSpec:
    if k < 1:
        raise ValueError("kernel dimension must be positive")
    total, _ = integrate.quad(base.pdf, -1.0, 1.0, points=[0.0], epsabs=1e-13, epsrel=1e-13)
    if abs(total - 1.0) > 1e-6:
        raise InvalidBase(f"base density {base.name!r} integrates to {total}")
    if not np.allclose(base.pdf(np.linspace(-1, 1, 201)), base.pdf(-np.linspace(-1, 1, 201))):
        raise InvalidBase(f"base density {base.name!r} is not symmetric")

    def func(pts):
        return np.prod(base.pdf(pts), axis=1)

    # |prod b(x_j) - prod b(y_j)| <= L_b * sup(b)^(k-1) * sum_j |x_j - y_j|
    lip = max(1.0, base.lipschitz * base.sup ** (k - 1))
    return KernelSpec(
        dim=k,
        func=func,
        lipschitz_L=lip,
        label=f"product({base.name})" if k == 1 else f"product({base.name})^{k}",
        support_norm=np.inf,
        base=base,
        non_lipschitz_edge=not base.lipschitz_at_edge,
        sup_value=base.sup**k,
    )


def make_kernel(name: str, k: int = 2) -> KernelSpec:
    """Look a kernel up by name: ``tricubic`` or a product base name."""
    if name in ("tricubic", "tricubic2d"):
        if k != 2:
            raise ValueError("the tricubic kernel is two-dimensional")
        return make_tricubic()
    if name not in BASES:
        raise ValueError(f"unknown kernel {name!r}")
    return make_product_kernel(BASES[name], k)


def eval_scaled(kernel: KernelSpec, eps: float, s) -> NDArray[np.float64] | float:
    """``K_eps(s) = eps^-k K(s / eps)``, exactly zero when ``|s|_inf > eps``."""
    if not eps > 0:
        raise NonpositiveBandwidth(f"bandwidth must be positive, got {eps}")
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0 or (s.ndim == 1 and kernel.dim > 1)
    pts = s.reshape(-1, kernel.dim)
    vals = kernel.evaluate(pts / eps) * eps ** (-kernel.dim)
    vals = np.where(np.abs(pts).max(axis=1) > eps, 0.0, vals)
    return float(vals[0]) if scalar else vals


def kernel_integral(kernel: KernelSpec, tol: float = 1e-11) -> float:
    """Adaptive-quadrature integral of ``K`` over its support."""
    if kernel.dim == 1:
        val, _ = integrate.quad(lambda u: kernel.evaluate(u), -1, 1, points=[0.0],
                                epsabs=tol, epsrel=tol)
        return val
    if kernel.dim == 2:
        if kernel.radial is not None:
            prof = kernel.radial
            val, _ = integrate.dblquad(
                lambda y, x: float(prof(math.hypot(x, y))), -1, 1,
                lambda x: -math.sqrt(max(0.0, 1 - x * x)),
                lambda x: math.sqrt(max(0.0, 1 - x * x)),
                epsabs=tol, epsrel=tol,
            )
            return val
        val, _ = integrate.nquad(
            lambda x, y: kernel.evaluate((x, y)), [[-1, 1], [-1, 1]],
            opts={"points": [0.0], "epsabs": tol, "epsrel": tol},
        )
        return val
    if kernel.base is None:
        raise ValueError("quadrature for k > 2 is only available for product kernels")
    one, _ = integrate.quad(kernel.base.pdf, -1, 1, points=[0.0], epsabs=tol, epsrel=tol)
    return one**kernel.dim


def radial_integral_tricubic() -> float:
    """``2 pi int_0^1 (1 - r^3)^3 r dr`` by quadrature (analytically ``2 pi * 81/440``)."""
    val, _ = integrate.quad(lambda r: (1 - r**3) ** 3 * r, 0, 1, epsabs=1e-14, epsrel=1e-14)
    return 2 * math.pi * val


def sample_kernel(kernel: KernelSpec, size: int, rng: np.random.Generator) -> NDArray:
    """Draw ``size`` vectors with density ``K`` by rejection from the uniform cube."""
    chunks = []
    have = 0
    bound = kernel.sup_value
    while have < size:
        m = min(2**21, max(1024, 4 * (size - have) * 2**kernel.dim))
        cand = rng.uniform(-1.0, 1.0, (m, kernel.dim))
        keep = rng.uniform(0.0, bound, m) < kernel.evaluate(cand)
        chunks.append(cand[keep])
        have += int(keep.sum())
    return np.concatenate(chunks)[:size]


@dataclass
class KernelReport:
    integral: float
    symmetry_defect: float
    lipschitz_estimate: float
    sup_estimate: float
    integral_ok: bool
    symmetric_ok: bool
    lipschitz_ok: bool
    sup_ok: bool

    @property
    def ok(self) -> bool:
        return self.integral_ok and self.symmetric_ok and self.lipschitz_ok and self.sup_ok


def verify_kernel(
    kernel: KernelSpec,
    samples: int = 2**14,
    seed: int = 0,
    integral_tol: float = 1e-3,
) -> KernelReport:
    """Sampled checks of normalisation, symmetry, Lipschitz bound and ``sup K <= L``.

    The integral uses scrambled Sobol points over ``[-1, 1]^k``.  Difference
    quotients are taken in the coordinate-sum metric on pairs lying strictly
    inside the open cube, so jumps on the cube boundary are not counted.
    """
    if samples < 10_000:
        raise ValueError("verify_kernel needs at least 10^4 samples")
    k = kernel.dim
    m = int(2 ** math.ceil(math.log2(samples)))
    sob = qmc.Sobol(d=k, scramble=True, seed=seed).random(m)
    u = 2.0 * sob - 1.0
    vals = kernel.evaluate(u)
    integral = float(vals.mean() * 2**k)
    sym = float(np.max(np.abs(vals - kernel.evaluate(-u))))

    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, (m, k)) * (1 - 1e-9)
    h = rng.normal(scale=1e-4, size=(m, k))
    b = a + h
    inside = np.all(np.abs(b) < 1.0, axis=1)
    a, b = a[inside], b[inside]
    dq = np.abs(kernel.evaluate(a) - kernel.evaluate(b)) / np.abs(a - b).sum(axis=1)
    lip = float(dq.max()) if dq.size else 0.0
    sup = float(max(vals.max(), kernel.evaluate(np.zeros(k))))
    return KernelReport(
        integral=integral,
        symmetry_defect=sym,
        lipschitz_estimate=lip,
        sup_estimate=sup,
        integral_ok=abs(integral - 1.0) <= integral_tol,
        symmetric_ok=sym <= 1e-12,
        lipschitz_ok=lip <= kernel.lipschitz_L,
        sup_ok=sup <= kernel.lipschitz_L,
    )
