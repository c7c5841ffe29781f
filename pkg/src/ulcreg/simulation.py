"""Seeded generators for designs, regression targets and noise processes.

Randomness comes from numpy's PCG64 bit generator.  Every per-run stream is
seeded by ``SeedSequence(master_seed, spawn_key=(run, stream))`` so streams
are independent functions of the master seed and the run index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray

from .errors import RejectionStall, UlcError
from .sample import Box, DesignSample

RNG_DESCRIPTION = "numpy PCG64 seeded by SeedSequence(master_seed, spawn_key=(run, stream))"

# stream indices used by the benchmark harness
STREAM_DESIGN, STREAM_NOISE, STREAM_SPLIT, STREAM_FOLDS = 0, 1, 2, 3

# a rejection sampler gives up once this many attempts accepted too rarely
_STALL_ATTEMPTS = 10**6
_STALL_RATE = 1e-4


def derive_seed(master_seed: int, run: int, stream: int = 0) -> int:
    """64-bit seed for ``(run, stream)`` derived from ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(run), int(stream)))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


DesignKind = Literal[
    "iid_uniform", "regular_grid", "switch_blocks", "polar", "truncated_gaussian", "custom"
]


@dataclass(frozen=True)
class DesignGeneratorConfig:
    """Recipe for a design sample.

    ``schedule`` lists block lengths for ``switch_blocks``; blocks alternate
    between the lower and upper half of the domain along ``split_axis``.
    ``first_side`` fixes the first block's half or leaves it to a fair coin.
    ``radial_power`` and ``tail_power`` give the polar radius density
    ``r^radial_power (r_max - r)^tail_power`` on ``[0, r_max]``.
    """

    kind: DesignKind
    n: int
    domain: Box = field(default_factory=lambda: Box.symmetric(2))
    seed: int = 0
    schedule: tuple[int, ...] = ()
    split_axis: int = 0
    first_side: Literal["random", "lower", "upper"] = "random"
    r_max: float = 2.0
    radial_power: float = 2.0
    tail_power: float = 0.1
    sd: float = 0.5
    sampler: Callable[[int, np.random.Generator], NDArray] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if self.n < 1:
            raise UlcError(f"design size must be positive, got {self.n}")
        object.__setattr__(self, "schedule", tuple(int(b) for b in self.schedule))
        if self.kind == "switch_blocks":
            s = np.asarray(self.schedule)
            if s.size == 0 or np.any(s < 1) or np.any(np.diff(s) < 0):
                raise UlcError("switch_blocks needs a nondecreasing schedule of positive blocks")
            if s.sum() < self.n:
                raise UlcError(f"schedule covers {s.sum()} draws, fewer than n={self.n}")
        if self.kind == "custom" and self.sampler is None:
            raise UlcError("a custom design needs a sampler")
        if self.first_side not in ("random", "lower", "upper"):
            raise UlcError(f"unknown first_side {self.first_side!r}")

    def with_seed(self, seed: int) -> "DesignGeneratorConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise UlcError("custom designs are not serialisable")
        return {
            "kind": self.kind, "n": self.n, "domain": self.domain.to_dict(), "seed": self.seed,
            "schedule": list(self.schedule), "split_axis": self.split_axis,
            "first_side": self.first_side, "r_max": self.r_max,
            "radial_power": self.radial_power, "tail_power": self.tail_power, "sd": self.sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignGeneratorConfig":
        d = dict(d)
        if "domain" in d:
            d["domain"] = Box.from_dict(d["domain"])
        if "schedule" in d:
            d["schedule"] = tuple(d["schedule"])
        return cls(**d)


def geometric_schedule(ratio: int, n: int) -> tuple[int, ...]:
    """Blocks ``1, ratio, ratio^2, ...`` totalling exactly ``n``.

    A final partial block is kept when it is at least as long as the block
    before it and merged into that block otherwise, so the schedule stays
    nondecreasing.
    """
    if ratio < 1 or n < 1:
        raise UlcError("ratio and n must be positive")
    blocks = []
    total = 0
    b = 1
    while total + b <= n:
        blocks.append(b)
        total += b
        if ratio == 1 and total == n:
            break
        b *= ratio
    rest = n - total
    if rest:
        if rest >= blocks[-1]:
            blocks.append(rest)
        else:
            blocks[-1] += rest
    return tuple(blocks)


def _guarded_rejection(draw: Callable[[int], NDArray], n: int, batch: int) -> NDArray:
    """Collect ``n`` accepted rows from ``draw(m)`` (which returns accepted rows of ``m`` tries)."""
    chunks = []
    have = 0
    attempts = 0
    while have < n:
        got = draw(batch)
        attempts += batch
        chunks.append(got)
        have += got.shape[0]
        if have < n and attempts >= _STALL_ATTEMPTS and have / attempts < _STALL_RATE:
            raise RejectionStall(f"accepted {have} of {attempts} proposals")
    return np.concatenate(chunks)[:n]


def polar_radius_density(r, r_max: float = 2.0, radial_power: float = 2.0,
                         tail_power: float = 0.1) -> NDArray:
    """Normalised density proportional to ``r^a (r_max - r)^b`` on ``[0, r_max]``."""
    from scipy.special import beta

    r = np.asarray(r, dtype=float)
    a, b = radial_power, tail_power
    norm = r_max ** (a + b + 1) * beta(a + 1, b + 1)
    inside = (r >= 0) & (r <= r_max)
    rc = np.clip(r, 0.0, r_max)
    return np.where(inside, rc**a * (r_max - rc) ** b / norm, 0.0)


def sample_polar_radii(size: int, rng: np.random.Generator, r_max: float = 2.0,
                       radial_power: float = 2.0, tail_power: float = 0.1) -> NDArray:
    """Rejection sampler for the polar radius, proposals uniform on ``[0, r_max]``."""
    a, b = radial_power, tail_power
    mode = r_max * a / (a + b) if a + b > 0 else 0.0
    peak = mode**a * (r_max - mode) ** b

    def draw(m):
        r = rng.uniform(0.0, r_max, m)
        u = rng.uniform(0.0, peak, m)
        return r[u < r**a * (r_max - r) ** b]

    return _guarded_rejection(draw, size, max(1024, 2 * size))


def _draw_polar(cfg: DesignGeneratorConfig, rng: np.random.Generator) -> NDArray:
    if cfg.domain.dim != 2:
        raise UlcError("polar designs are two-dimensional")
    centre = 0.5 * (cfg.domain.lo + cfg.domain.hi)

    def draw(m):
        r = sample_polar_radii(m, rng, cfg.r_max, cfg.radial_power, cfg.tail_power)
        phi = rng.uniform(0.0, 2 * np.pi, m)
        pts = centre + np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        return pts[cfg.domain.contains(pts)]

    return _guarded_rejection(draw, cfg.n, max(1024, 2 * cfg.n))


def _draw_gaussian(cfg: DesignGeneratorConfig, rng: np.random.Generator) -> NDArray:
    centre = 0.5 * (cfg.domain.lo + cfg.domain.hi)

    def draw(m):
        pts = centre + rng.normal(0.0, cfg.sd, (m, cfg.domain.dim))
        return pts[cfg.domain.contains(pts)]

    return _guarded_rejection(draw, cfg.n, max(1024, 2 * cfg.n))


def _draw_switch_blocks(cfg: DesignGeneratorConfig, rng: np.random.Generator) -> NDArray:
    dom = cfg.domain
    ax = cfg.split_axis
    mid = 0.5 * (dom.lo[ax] + dom.hi[ax])
    if cfg.first_side == "random":
        side = int(rng.integers(0, 2))
    else:
        side = 0 if cfg.first_side == "lower" else 1
    out = np.empty((cfg.n, dom.dim))
    pos = 0
    for block in cfg.schedule:
        m = min(block, cfg.n - pos)
        if m <= 0:
            break
        lo = dom.lo.copy()
        hi = dom.hi.copy()
        if side == 0:
            hi[ax] = mid
        else:
            lo[ax] = mid
        out[pos:pos + m] = rng.uniform(lo, hi, (m, dom.dim))
        pos += m
        side = 1 - side
    return out


def regular_grid_points(n: int, domain: Box) -> NDArray:
    """Centres of the ``side^k`` congruent sub-boxes; ``n`` must be a perfect k-th power."""
    k = domain.dim
    side = int(round(n ** (1.0 / k)))
    if side**k != n:
        raise UlcError(f"regular_grid needs a perfect {k}-th power, got n={n}")
    axes = [lo + (np.arange(side) + 0.5) * (hi - lo) / side for lo, hi in zip(domain.lo, domain.hi)]
    grids = np.meshgrid(*axes[::-1], indexing="ij")
    return np.column_stack([g.ravel() for g in grids[::-1]])


def generate_design(cfg: DesignGeneratorConfig) -> DesignSample:
    rng = make_rng(cfg.seed)
    if cfg.kind == "iid_uniform":
        pts = rng.uniform(cfg.domain.lo, cfg.domain.hi, (cfg.n, cfg.domain.dim))
    elif cfg.kind == "regular_grid":
        pts = regular_grid_points(cfg.n, cfg.domain)
    elif cfg.kind == "switch_blocks":
        pts = _draw_switch_blocks(cfg, rng)
    elif cfg.kind == "polar":
        pts = _draw_polar(cfg, rng)
    elif cfg.kind == "truncated_gaussian":
        pts = _draw_gaussian(cfg, rng)
    elif cfg.kind == "custom":
        pts = np.asarray(cfg.sampler(cfg.n, rng), dtype=float).reshape(cfg.n, -1)
    else:
        raise UlcError(f"unknown design kind {cfg.kind!r}")
    return DesignSample(pts, cfg.domain)


TargetKind = Literal["logistic_cubic", "radial_sinc", "constant", "holder", "wiener"]

WIENER_STEPS = 2**16


@dataclass(frozen=True)
class TargetFunction:
    """Regression function ``f``; call it on an ``(m, k)`` array.

    ``holder`` is ``zeta * sum_j c_j sin(<w_j, x> + phi_j) / S`` with seeded
    coefficients and ``S = sum_j |c_j| 2^(1 - alpha) |w_j|_1^alpha``.  Since
    ``|sin a - sin b| <= 2^(1-alpha) |a - b|^alpha`` this satisfies
    ``|f(x) - f(y)| <= zeta |x - y|_inf^alpha``.
    """

    kind: TargetKind
    dim: int = 2
    c: float = 0.0
    alpha: float = 1.0
    zeta: float = 1.0
    seed: int = 0
    terms: int = 12
    _table: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        if self.kind in ("logistic_cubic",) and self.dim != 2:
            raise UlcError("logistic_cubic is defined for k=2")
        if self.kind == "wiener":
            if self.dim != 1:
                raise UlcError("the Wiener target is one-dimensional")
            rng = make_rng(self.seed)
            steps = rng.normal(0.0, math.sqrt(1.0 / WIENER_STEPS), WIENER_STEPS)
            path = np.concatenate([[0.0], np.cumsum(steps)])
            object.__setattr__(self, "_table", (path,))
        elif self.kind == "holder":
            if not (0 < self.alpha <= 1 and self.zeta > 0):
                raise UlcError("holder target needs alpha in (0, 1] and zeta > 0")
            rng = make_rng(self.seed)
            freq = rng.normal(0.0, 6.0, (self.terms, self.dim))
            coef = rng.normal(0.0, 1.0, self.terms)
            phase = rng.uniform(0.0, 2 * np.pi, self.terms)
            scale = np.sum(np.abs(coef) * 2 ** (1 - self.alpha) * np.abs(freq).sum(1) ** self.alpha)
            object.__setattr__(self, "_table", (freq, coef, phase, scale))
        elif self.kind not in ("logistic_cubic", "radial_sinc", "constant"):
            raise UlcError(f"unknown target kind {self.kind!r}")

    def __call__(self, t) -> NDArray[np.float64]:
        x = np.asarray(t, dtype=float).reshape(-1, self.dim)
        if self.kind == "logistic_cubic":
            return 5.0 / (1.0 + np.exp(-20.0 * x[:, 0])) - 2.0 * x[:, 1] ** 3
        if self.kind == "radial_sinc":
            r = np.sqrt(np.einsum("ij,ij->i", x, x))
            safe = np.where(r > 0, r, 1.0)
            return np.where(r > 0, np.sin(10.0 * safe) / safe, 10.0)
        if self.kind == "constant":
            return np.full(x.shape[0], float(self.c))
        if self.kind == "holder":
            freq, coef, phase, scale = self._table
            return self.zeta * (np.sin(x @ freq.T + phase) @ coef) / scale
        (path,) = self._table
        return np.interp(x[:, 0], np.linspace(0.0, 1.0, WIENER_STEPS + 1), path)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "c": self.c, "alpha": self.alpha,
                "zeta": self.zeta, "seed": self.seed, "terms": self.terms}

    @classmethod
    def from_dict(cls, d: dict) -> "TargetFunction":
        return cls(**d)


def evaluate_target(fn: TargetFunction, t) -> NDArray[np.float64] | float:
    t = np.asarray(t, dtype=float)
    out = fn(t)
    return float(out[0]) if t.ndim <= 1 and out.size == 1 else out


@dataclass(frozen=True)
class NoiseConfig:
    """``iid_gaussian``: N(0, sigma^2).  ``mds_example``: xi_i = eta_i (0.5 + 0.5 |sin xi_{i-1}|) sigma."""

    kind: Literal["iid_gaussian", "mds_example"] = "iid_gaussian"
    sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise UlcError(f"sigma must be nonnegative, got {self.sigma}")
        if self.kind not in ("iid_gaussian", "mds_example"):
            raise UlcError(f"unknown noise kind {self.kind!r}")

    def with_seed(self, seed: int) -> "NoiseConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        return cls(**d)


def generate_noise(cfg: NoiseConfig, n: int, predecessor: float = 0.0) -> NDArray[np.float64]:
    """``n`` noise values; ``predecessor`` seeds the recursion of the dependent kind."""
    if n < 1:
        raise UlcError("noise length must be positive")
    rng = make_rng(cfg.seed)
    eta = rng.standard_normal(n)
    if cfg.sigma == 0:
        return np.zeros(n)
    if cfg.kind == "iid_gaussian":
        return cfg.sigma * eta
    out = np.empty(n)
    prev = float(predecessor)
    for i in range(n):
        prev = eta[i] * (0.5 + 0.5 * abs(math.sin(prev))) * cfg.sigma
        out[i] = prev
    return out


def synthetic_catalog(n: int = 10184, seed: int = 0) -> NDArray[np.float64]:
    """Catalog-shaped rows ``(longitude, latitude, magnitude)``.

    Epicentres cluster along an arc resembling a subduction margin;
    magnitudes follow a truncated exponential law on ``[2.7, 7.8]`` and both
    endpoints occur exactly once.
    """
    rng = make_rng(seed)
    s = rng.uniform(0.0, 1.0, n)
    lon = 129.0 + 16.0 * s + rng.normal(0.0, 0.6, n)
    lat = 31.0 + 13.0 * s - 3.0 * np.sin(np.pi * s) + rng.normal(0.0, 0.6, n)
    hubs = rng.uniform(0.0, 1.0, 12)
    pick = rng.random(n) < 0.35
    h = rng.choice(hubs, n)
    lon = np.where(pick, 129.0 + 16.0 * h + rng.normal(0.0, 0.15, n), lon)
    lat = np.where(pick, 31.0 + 13.0 * h - 3.0 * np.sin(np.pi * h) + rng.normal(0.0, 0.15, n), lat)
    lo, hi = 2.7, 7.8
    u = rng.random(n)
    rate = math.log(10.0)
    mag = lo - np.log1p(-u * (1 - math.exp(-rate * (hi - lo)))) / rate
    mag = np.round(np.clip(mag, lo, hi), 1)
    mag[0], mag[1] = lo, hi
    return np.column_stack([lon, lat, mag])
