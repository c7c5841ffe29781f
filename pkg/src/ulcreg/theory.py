"""Explicit error-bound calculators and asymptotic diagnostics for the local-constant estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray
from scipy import integrate

from .errors import (
    InvalidOrder,
    NoRoot,
    PreconditionViolated,
    UlcError,
    UnsupportedGeometry,
    ZeroWindow,
)
from .estimators import FittedLocalConstant
from .kernels import KernelSpec, sample_kernel
from .sample import Box


def smoothing_integral(domain: Box, kernel: KernelSpec, eps: float, t) -> float:
    """``J_eps(t) = int_domain K_eps(t - x) dx``.

    Product kernels use the exact product of clipped 1-d integrals; other
    kernels use adaptive quadrature (absolute tolerance 1e-8 requested,
    1e-5 guaranteed).
    """
    if not isinstance(domain, Box):
        raise UnsupportedGeometry("only box domains are supported")
    if not 0 < eps <= 1:
        raise UlcError(f"eps must lie in (0, 1], got {eps}")
    t = np.asarray(t, dtype=float).reshape(-1)
    # substituting u = (t - x)/eps maps the domain to [(t - hi)/eps, (t - lo)/eps]
    a = np.clip((t - domain.hi) / eps, -1.0, 1.0)
    b = np.clip((t - domain.lo) / eps, -1.0, 1.0)
    if np.all(a == -1.0) and np.all(b == 1.0):
        # window entirely inside the domain: the full kernel mass
        return 1.0
    if kernel.base is not None:
        cdf = kernel.base.cdf
        return float(np.prod(cdf(b) - cdf(a)))
    if kernel.dim == 1:
        val, _ = integrate.quad(lambda u: kernel.evaluate(u), a[0], b[0], epsabs=1e-10)
        return val
    if kernel.dim == 2 and kernel.radial is not None:
        return _radial_clipped_mass(kernel.radial, *_canonical_rect(a, b))
    if kernel.dim == 2:
        val, _ = integrate.dblquad(
            lambda y, x: kernel.evaluate((x, y)), a[0], b[0], a[1], b[1],
            epsabs=1e-9, epsrel=1e-9,
        )
        return val
    raise UnsupportedGeometry("quadrature path supports k <= 2")


def _canonical_rect(a, b) -> tuple[float, float, float, float]:
    # a radial kernel is invariant under axis reflections and swaps
    iv = sorted(min((float(lo), float(hi)), (-float(hi), -float(lo))) for lo, hi in zip(a, b))
    return iv[0][0], iv[0][1], iv[1][0], iv[1][1]


@lru_cache(maxsize=65536)
def _radial_clipped_mass(prof, ax, bx, ay, by) -> float:
    """Mass of a radial unit-disk kernel over ``[ax, bx] x [ay, by]``, integrating over the disk only."""
    x0, x1 = max(ax, -1.0), min(bx, 1.0)
    if x0 >= x1:
        return 0.0

    def ylo(x):
        return max(ay, -math.sqrt(max(0.0, 1 - x * x)))

    def yhi(x):
        return max(ylo(x), min(by, math.sqrt(max(0.0, 1 - x * x))))

    val, _ = integrate.dblquad(lambda y, x: float(prof(math.hypot(x, y))), x0, x1, ylo, yhi,
                               epsabs=1e-9, epsrel=1e-9)
    return val


def smoothing_integral_mc(domain: Box, kernel: KernelSpec, eps: float, t, samples: int,
                          rng: np.random.Generator) -> tuple[float, float]:
    """Monte-Carlo ``P(t - theta_eps in domain)`` with ``theta_eps ~ K_eps``; returns (estimate, SE)."""
    t = np.asarray(t, dtype=float).reshape(-1)
    theta = eps * sample_kernel(kernel, samples, rng)
    hit = domain.contains(t - theta)
    p = float(hit.mean())
    return p, math.sqrt(max(p * (1 - p), 1e-300) / samples)


def rho_lower_bound(domain: Box, kernel: KernelSpec, eps0: float, probe_count: int = 1024,
                    eps_count: int = 8, probes: NDArray | None = None) -> float:
    """Smallest ``J_eps(t)`` over probe points and an ``eps`` grid in ``(0, eps0]``.

    By default the probes are a lattice of about ``probe_count`` nodes plus
    the domain corners.
    """
    if probes is None:
        if probe_count < 1000:
            raise ValueError("probe_count must be at least 10^3")
        side = max(2, int(math.ceil(probe_count ** (1 / domain.dim))))
        axes = [np.linspace(lo, hi, side) for lo, hi in zip(domain.lo, domain.hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, domain.dim)
        probes = np.vstack([grid, domain.corners()])
    eps_grid = eps0 * np.arange(1, eps_count + 1) / eps_count
    best = math.inf
    for eps in eps_grid:
        for t in np.atleast_2d(probes):
            best = min(best, smoothing_integral(domain, kernel, float(eps), t))
    if kernel.base is not None and np.all(domain.edges > eps0):
        # product kernel on a box with long edges: J >= 2^-k
        if best < 2.0 ** (-domain.dim) - 1e-9:
            raise UlcError(f"smoothing integral {best} falls below 2^-k")
    return best


def g_constant_upper(k: int, p: float) -> float:
    """Upper bound on the chaining constant ``G(k, p)``."""
    if not p >= 2:
        raise InvalidOrder(f"moment order must be >= 2, got {p}")
    if not p > k:
        raise InvalidOrder(f"moment order p={p} must exceed the dimension k={k}")
    base = 2.0 ** ((p - k) / (p + 1)) - 1.0
    return (p - 1) ** (p / 2) * 2.0 ** (p * (k + 1.5)) * (1.0 + k / base) ** (p + 1)


@dataclass(frozen=True)
class BoundInputs:
    k: int
    p: float
    rho: float
    M_p: float
    L: float
    eps: float
    eps0: float
    E_delta_pow: float
    P_delta_exceed: float

    def __post_init__(self):
        if not (self.p >= 2 and self.p > self.k):
            raise InvalidOrder(f"need p >= 2 and p > k, got p={self.p}, k={self.k}")
        if not 0 < self.rho <= 1:
            raise UlcError(f"rho must lie in (0, 1], got {self.rho}")
        if min(self.M_p, self.E_delta_pow, self.P_delta_exceed) < 0:
            raise UlcError("moments and probabilities must be nonnegative")
        if not 0 < self.eps <= self.eps0 <= 1:
            raise UlcError("need 0 < eps <= eps0 <= 1")
        if self.L < 1:
            raise UlcError("the Lipschitz constant must be at least 1")

    @property
    def exceed_threshold(self) -> float:
        """``eps * min(1, rho / (k 2^(k+1) L))``, the level whose exceedance enters the bound."""
        return self.eps * min(1.0, self.rho / (self.k * 2 ** (self.k + 1) * self.L))


@dataclass(frozen=True)
class TailBound:
    value: float
    raw: float
    G_upper: float


def theorem1_tail_bound(inputs: BoundInputs, y: float) -> TailBound:
    """Upper bound on ``P(zeta_n(eps) > y)`` for the stochastic part of the sup-error."""
    if not y > 0:
        raise UlcError("y must be positive")
    b = inputs
    g = g_constant_upper(b.k, b.p)
    first = (
        g * b.rho ** (-b.p) * b.M_p * b.L ** (b.p / 2) * y ** (-b.p)
        * b.eps ** (-b.k * (b.p / 2 + 1)) * b.E_delta_pow
    )
    raw = first + b.P_delta_exceed
    return TailBound(value=min(1.0, max(0.0, raw)), raw=raw, G_upper=g)


def lemma2_lower_bound(rho: float, k: int, L: float, delta: float, eps: float) -> float:
    """``rho - k 2^k L delta / eps``, a lower bound on the empirical window mass when delta <= eps."""
    if delta > eps:
        raise PreconditionViolated(f"need delta <= eps, got delta={delta}, eps={eps}")
    return rho - k * 2**k * L * delta / eps


@dataclass(frozen=True)
class ModulusModel:
    """Modulus of continuity: Hoelder ``zeta * eps^alpha`` or a tabulated piecewise-linear curve."""

    form: Literal["holder", "tabulated"] = "holder"
    alpha: float = 1.0
    zeta: float = 1.0
    table_eps: tuple = ()
    table_omega: tuple = ()

    def __post_init__(self):
        if self.form == "holder":
            if not (0 < self.alpha <= 1 and self.zeta > 0):
                raise UlcError("holder modulus needs alpha in (0, 1] and zeta > 0")
        elif self.form == "tabulated":
            e = np.asarray(self.table_eps, dtype=float)
            w = np.asarray(self.table_omega, dtype=float)
            if e.size < 2 or e.size != w.size or np.any(np.diff(e) <= 0) or np.any(np.diff(w) < 0):
                raise UlcError("tabulated modulus must be increasing in eps and nondecreasing")
        else:
            raise UlcError(f"unknown modulus form {self.form!r}")

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        if self.form == "holder":
            return self.zeta * eps**self.alpha
        e = np.concatenate([[0.0], self.table_eps])
        w = np.concatenate([[0.0], self.table_omega])
        return np.interp(eps, e, w)


def _bisect_log(g: Callable[[float], float]) -> float:
    """Root of an increasing ``g`` on ``(0, 1]``, bisecting ``log eps`` to full relative precision."""
    lo, hi = math.log(1e-300), 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(math.exp(mid)) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    return math.exp(0.5 * (lo + hi))


def solve_optimal_bandwidth(modulus: ModulusModel, E_delta_pow: float, k: int, p: float) -> float:
    """Root in ``(0, 1]`` of ``eps^(k(p/2+1)) omega(eps)^p = E(delta_n^(kp/2))`` by bisection."""
    if not E_delta_pow > 0:
        raise UlcError("E_delta_pow must be positive")
    expo = k * (p / 2 + 1)

    def g(eps):
        return eps**expo * float(modulus(eps)) ** p - E_delta_pow

    if g(1.0) < 0:
        raise NoRoot("eps^(k(p/2+1)) omega^p(eps) stays below E_delta_pow on (0, 1]")
    return _bisect_log(g)


def optimal_bandwidth_holder(alpha: float, zeta: float, E_delta_pow: float, k: int, p: float) -> float:
    return (E_delta_pow / zeta**p) ** (1.0 / (k * (p / 2 + 1) + alpha * p))


@dataclass(frozen=True)
class VarianceConstants:
    var_spacings: float
    var_voronoi: float


def asymptotic_variance_constants(M2: float, eps: float, n: int, density_at_t: float,
                                  kernel_1d_square_integral: float) -> VarianceConstants:
    """Leading variance terms of the 1-d spacing-weighted and midpoint-cell-weighted estimators."""
    scale = M2 / (eps * n * density_at_t) * kernel_1d_square_integral
    return VarianceConstants(var_spacings=2.0 * scale, var_voronoi=1.5 * scale)


@dataclass(frozen=True)
class NormalityReport:
    h_n: float
    B_sq: float
    J_n: float
    r: float | None = None
    studentized: float | None = None


def window_statistics(a) -> tuple[float, float, float]:
    """``(h_n, B_sq, J_n)`` from window weights ``a_j = K_eps(t - X_j) w_j``."""
    a = np.asarray(a, dtype=float)
    s1 = float(a.sum())
    if not s1 > 0:
        raise ZeroWindow("no design point carries positive weight at t")
    s2 = float(np.dot(a, a))
    return float(a.max() ** 2 / s2), s2 / s1**2, s1


def normality_diagnostics(model: FittedLocalConstant, t,
                          true_f: Callable[[NDArray], NDArray] | None = None) -> NormalityReport:
    """Studentisation quantities at ``t``; ``true_f`` enables the bias term and studentised value."""
    if model.mode != "ulc":
        raise UlcError("normality diagnostics apply to ulc-mode models")
    t = np.asarray(t, dtype=float).reshape(1, -1)
    idx, a = model.window_weights(t)
    h_n, b_sq, j_n = window_statistics(a)
    if true_f is None:
        return NormalityReport(h_n, b_sq, j_n)
    f_t = float(np.asarray(true_f(t)).reshape(-1)[0])
    f_x = np.asarray(true_f(model.sample.points[idx]), dtype=float).reshape(-1)
    r = float(np.dot(f_x - f_t, a) / j_n)
    est = model.evaluate(t[0])
    return NormalityReport(h_n, b_sq, j_n, r, (est - f_t - r) / math.sqrt(b_sq))
