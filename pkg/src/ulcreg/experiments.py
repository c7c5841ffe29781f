"""Evaluation protocol: splits, cross-validated bandwidths, error metrics and benchmarks."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree
from scipy.stats import norm

from .errors import EmptyFold, LengthMismatch, PreconditionViolated, RunError, UlcError
from .estimators import FittedLocalConstant, fit, pair_kernel_values, ratio, support_distance
from .kernels import KernelSpec, make_kernel
from .partition import build_partition
from .sample import DesignSample, Lattice
from .simulation import (
    RNG_DESCRIPTION,
    STREAM_DESIGN,
    STREAM_FOLDS,
    STREAM_NOISE,
    STREAM_SPLIT,
    DesignGeneratorConfig,
    NoiseConfig,
    TargetFunction,
    derive_seed,
    generate_design,
    generate_noise,
    geometric_schedule,
    make_rng,
)

SCHEMA_VERSION = 1
EstimatorKind = Literal["ULCV", "ULCM", "NW"]
ESTIMATORS: tuple[str, ...] = ("ULCV", "ULCM", "NW")


def log_grid(count: int, lo: float, hi: float) -> NDArray[np.float64]:
    """``count`` values equispaced in log scale from ``lo`` to ``hi`` inclusive."""
    if not (lo > 0 and hi >= lo and count >= 1):
        raise UlcError(f"invalid log grid ({count}, {lo}, {hi})")
    if count == 1:
        return np.array([float(lo)])
    g = np.exp(np.linspace(math.log(lo), math.log(hi), count))
    g[0], g[-1] = lo, hi
    return g


def split_train_validation(sample: DesignSample, val_fraction: float, seed: int):
    """Random split into ``ceil((1 - v) n)`` training and the remaining validation points."""
    if sample.n < 5:
        raise UlcError("splitting needs at least 5 observations")
    if not 0 < val_fraction < 1:
        raise UlcError("val_fraction must lie in (0, 1)")
    perm = make_rng(seed).permutation(sample.n)
    n_train = math.ceil((1 - val_fraction) * sample.n - 1e-9)
    return sample.subset(np.sort(perm[:n_train])), sample.subset(np.sort(perm[n_train:]))


def fold_assignment(n: int, folds: int, seed: int) -> NDArray[np.int64]:
    """Fold label of every observation; fold sizes differ by at most one."""
    if folds < 2:
        raise UlcError("cross-validation needs at least two folds")
    if folds > n:
        raise EmptyFold(f"{folds} folds for {n} observations")
    labels = np.empty(n, dtype=np.int64)
    labels[make_rng(seed).permutation(n)] = np.arange(n) % folds
    return labels


def estimator_weights(kind: str, sample: DesignSample, measure_cap: float | None = None) -> NDArray:
    """Cell measures for a ULC kind (partition rebuilt from ``sample``) or unit weights for NW."""
    if kind == "NW":
        return np.ones(sample.n)
    if kind == "ULCV":
        method = "voronoi2d" if sample.dim == 2 else "voronoi1d"
    elif kind == "ULCM":
        method = "median"
    else:
        raise UlcError(f"unknown estimator kind {kind!r}")
    w = build_partition(sample, method).measures
    return np.minimum(w, measure_cap) if measure_cap is not None else w


def fit_estimator(kind: str, sample: DesignSample, kernel: KernelSpec, eps: float,
                  measure_cap: float | None = None) -> FittedLocalConstant:
    mode = "nw" if kind == "NW" else "ulc"
    return fit(sample, estimator_weights(kind, sample, measure_cap), kernel, eps, mode)


def _tie_break(curve: NDArray, grid: NDArray) -> float:
    # equal errors up to rounding count as ties; the smallest eps wins
    best = np.nanmin(curve)
    tol = 1e-12 * abs(best) + 1e-15
    return float(grid[int(np.flatnonzero(curve <= best + tol)[0])])


@dataclass(frozen=True)
class CVResult:
    eps_grid: NDArray[np.float64]
    curves: dict
    chosen: dict
    folds: NDArray[np.int64] = field(repr=False)


def cross_validate(
    train: DesignSample,
    kinds: Sequence[str],
    eps_grid,
    folds: int,
    seed: int,
    kernel: KernelSpec,
    measure_cap: float | None = None,
) -> CVResult:
    """K-fold CV error curves for several estimator kinds sharing one fold assignment.

    For every fold the held-out/complement neighbour pairs are found once at
    the largest bandwidth and sorted by distance; each smaller bandwidth
    reuses a prefix of them.  ULC weights come from a partition of the fold
    complement.
    """
    grid = np.sort(np.asarray(eps_grid, dtype=float))
    if grid.size == 0 or grid[0] <= 0:
        raise UlcError("eps grid must be nonempty and positive")
    if train.responses is None:
        raise UlcError("cross-validation needs responses")
    labels = fold_assignment(train.n, folds, seed)
    sq_err = {k: np.zeros(grid.size) for k in kinds}
    y = train.responses
    p = kernel.support_norm
    for f in range(folds):
        held = np.flatnonzero(labels == f)
        comp = np.flatnonzero(labels != f)
        if held.size == 0 or comp.size == 0:
            raise EmptyFold(f"fold {f} is empty")
        comp_sample = train.subset(comp)
        weights = {k: estimator_weights(k, comp_sample, measure_cap) for k in kinds}
        t = train.points[held]
        pairs = cKDTree(t).sparse_distance_matrix(
            cKDTree(comp_sample.points), grid[-1] * (1 + 1e-12), p=p, output_type="ndarray")
        qi = pairs["i"].astype(np.int64)
        xj = pairs["j"].astype(np.int64)
        diff = t[qi] - comp_sample.points[xj]
        dist = support_distance(diff, p)
        # bucket pairs by the first grid bandwidth that reaches them
        bucket = np.searchsorted(grid, dist, side="left").astype(np.int16)
        order = np.argsort(bucket, kind="stable")
        qi, xj, diff, dist = qi[order], xj[order], diff[order], dist[order]
        ends = np.searchsorted(bucket[order], np.arange(grid.size), side="right")
        wy = {k: (weights[k][xj], weights[k][xj] * comp_sample.responses[xj]) for k in kinds}
        yh = y[held]
        for e, eps in enumerate(grid):
            m = int(ends[e])
            kv = pair_kernel_values(kernel, eps, diff[:m], dist[:m])
            for k in kinds:
                w, wyk = wy[k]
                num = np.bincount(qi[:m], weights=kv * wyk[:m], minlength=held.size)
                den = np.bincount(qi[:m], weights=kv * w[:m], minlength=held.size)
                sq_err[k][e] += np.mean((ratio(num, den) - yh) ** 2)
    curves = {k: v / folds for k, v in sq_err.items()}
    chosen = {k: _tie_break(curves[k], grid) for k in kinds}
    return CVResult(grid, curves, chosen, labels)


def cross_validate_bandwidth(train: DesignSample, kind: str, eps_grid, folds: int, seed: int,
                             kernel: KernelSpec | None = None,
                             measure_cap: float | None = None) -> float:
    """Bandwidth on ``eps_grid`` minimising the mean held-out MSE over ``folds`` folds."""
    kernel = kernel or make_kernel("tricubic" if train.dim == 2 else "epanechnikov", train.dim)
    return cross_validate(train, [kind], eps_grid, folds, seed, kernel, measure_cap).chosen[kind]


def compute_mse(model: FittedLocalConstant, validation: DesignSample) -> float:
    if validation.n == 0 or validation.responses is None:
        raise UlcError("validation set must be nonempty with responses")
    return float(np.mean((model.predict(validation.points) - validation.responses) ** 2))


def compute_maxe(model: FittedLocalConstant, target, maxe_grid: Lattice) -> float:
    """Largest absolute deviation from ``target`` over the lattice nodes."""
    nodes = maxe_grid.points()
    if nodes.shape[0] == 0:
        raise UlcError("MaxE grid is empty")
    return float(np.max(np.abs(model.predict(nodes) - np.asarray(target(nodes)).reshape(-1))))


def compute_maxe_validation(model: FittedLocalConstant, validation: DesignSample) -> float:
    """Largest absolute residual on held-out observations (for data without a known truth)."""
    return float(np.max(np.abs(model.predict(validation.points) - validation.responses)))


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_two_sided: float
    n_used: int
    method: Literal["exact", "normal", "degenerate"]
    degenerate: bool = False


def _signed_ranks(a, b):
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size != b.size:
        raise LengthMismatch(f"paired samples have lengths {a.size} and {b.size}")
    d = a - b
    d = d[d != 0]
    absd = np.abs(d)
    # average ranks for ties
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(d.size)
    sorted_abs = absd[order]
    i = 0
    ties = []
    while i < d.size:
        j = i
        while j + 1 < d.size and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        ties.append(j - i + 1)
        i = j + 1
    return d, ranks, np.asarray(ties, dtype=float)


def wilcoxon_exact_p(ranks: NDArray, w_plus: float) -> float:
    """Two-sided p by enumerating all ``2^n`` sign patterns of the given ranks."""
    n = ranks.size
    bits = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    dist = bits @ ranks
    centre = ranks.sum() / 2
    dev = abs(w_plus - centre)
    return float(np.mean(np.abs(dist - centre) >= dev - 1e-9))


def wilcoxon_signed_rank(paired_a, paired_b,
                         method: Literal["auto", "exact", "normal"] = "auto") -> WilcoxonResult:
    """Paired signed-rank test; ``statistic`` is the sum of ranks of positive differences.

    ``auto`` enumerates exactly for at most 12 nonzero differences and uses
    the normal approximation with tie-corrected variance and continuity
    correction otherwise.
    """
    d, ranks, ties = _signed_ranks(paired_a, paired_b)
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate", True)
    if n < 5:
        raise PreconditionViolated(f"need at least 5 nonzero differences, got {n}")
    w_plus = float(ranks[d > 0].sum())
    if method == "exact" or (method == "auto" and n <= 12):
        if n > 24:
            raise UlcError("exact enumeration is limited to n <= 24")
        return WilcoxonResult(w_plus, wilcoxon_exact_p(ranks, w_plus), n, "exact")
    mean = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24 - np.sum(ties**3 - ties) / 48
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
    return WilcoxonResult(w_plus, float(min(1.0, 2 * norm.sf(z))), n, "normal")


@dataclass(frozen=True)
class ExperimentConfig:
    """A complete benchmark recipe; serialises to JSON with ``schema_version``."""

    design: DesignGeneratorConfig
    target: TargetFunction
    noise: NoiseConfig
    estimators: tuple[str, ...] = ESTIMATORS
    runs: int = 100
    eps_count: int = 20
    eps_lo: float = 0.01
    eps_hi: float = 0.5
    folds: int = 10
    val_fraction: float = 0.2
    maxe_counts: tuple[int, ...] = (100, 100)
    master_seed: int = 0
    kernel: str = "tricubic"
    name: str = "experiment"

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "maxe_counts", tuple(int(c) for c in self.maxe_counts))
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise UlcError(f"unknown estimators {sorted(bad)}")
        if not self.eps_lo > 0 or self.eps_hi < self.eps_lo:
            raise UlcError("eps grid needs 0 < lo <= hi")
        if self.folds < 2:
            raise UlcError("folds must be at least 2")
        if not 0 < self.val_fraction < 1:
            raise UlcError("val_fraction must lie in (0, 1)")
        if self.runs < 1:
            raise UlcError("runs must be positive")

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def eps_grid(self) -> NDArray[np.float64]:
        return log_grid(self.eps_count, self.eps_lo, self.eps_hi)

    @property
    def maxe_grid(self) -> Lattice:
        return Lattice(self.maxe_counts, self.design.domain)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "estimators": list(self.estimators),
            "runs": self.runs,
            "n": self.design.n,
            "design": self.design.to_dict(),
            "target": self.target.to_dict(),
            "noise": self.noise.to_dict(),
            "eps_grid": {"count": self.eps_count, "lo": self.eps_lo, "hi": self.eps_hi},
            "folds": self.folds,
            "val_fraction": self.val_fraction,
            "maxe_grid": {"counts": list(self.maxe_counts)},
            "master_seed": self.master_seed,
            "kernel": self.kernel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise UlcError(f"unsupported config schema_version {version!r}")
        design = dict(d["design"])
        if "n" in d:
            design["n"] = d["n"]
        grid = d.get("eps_grid", {})
        return cls(
            design=DesignGeneratorConfig.from_dict(design),
            target=TargetFunction.from_dict(d["target"]),
            noise=NoiseConfig.from_dict(d["noise"]),
            estimators=tuple(d.get("estimators", ESTIMATORS)),
            runs=int(d.get("runs", 100)),
            eps_count=int(grid.get("count", 20)),
            eps_lo=float(grid.get("lo", 0.01)),
            eps_hi=float(grid.get("hi", 0.5)),
            folds=int(d.get("folds", 10)),
            val_fraction=float(d.get("val_fraction", 0.2)),
            maxe_counts=tuple(d.get("maxe_grid", {}).get("counts", (100, 100))),
            master_seed=int(d.get("master_seed", 0)),
            kernel=d.get("kernel", "tricubic"),
            name=d.get("name", "experiment"),
        )

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _example_base(design: DesignGeneratorConfig, target: str, name: str, **kw) -> ExperimentConfig:
    return ExperimentConfig(
        design=design,
        target=TargetFunction(target),
        noise=NoiseConfig("iid_gaussian", 0.5),
        name=name,
        **kw,
    )


def example1_config(**kw) -> ExperimentConfig:
    """Block-switching halves of [-1, 1]^2 after 1, 10, 100, 1000 draws; logistic-cubic target."""
    n = kw.pop("n", 5000)
    design = DesignGeneratorConfig("switch_blocks", n, schedule=geometric_schedule(10, n))
    return _example_base(design, "logistic_cubic", "example1", **kw)


def example2_config(**kw) -> ExperimentConfig:
    """Polar design with radius density ~ r^2 (2 - r)^0.1 restricted to [-1, 1]^2; radial sinc target."""
    design = DesignGeneratorConfig("polar", kw.pop("n", 5000))
    return _example_base(design, "radial_sinc", "example2", **kw)


def example3_config(**kw) -> ExperimentConfig:
    """Gaussian coordinates (sd 1/2) restricted to [-1, 1]^2; radial sinc target."""
    design = DesignGeneratorConfig("truncated_gaussian", kw.pop("n", 5000), sd=0.5)
    return _example_base(design, "radial_sinc", "example3", **kw)


PRESETS = {"example1": example1_config, "example2": example2_config, "example3": example3_config}


@dataclass(frozen=True)
class RunRow:
    run: int
    estimator: str
    eps: float
    mse: float
    maxe: float


def _run_once(cfg: ExperimentConfig, run: int) -> list[RunRow]:
    seed = cfg.master_seed
    design = generate_design(cfg.design.with_seed(derive_seed(seed, run, STREAM_DESIGN)))
    noise = generate_noise(cfg.noise.with_seed(derive_seed(seed, run, STREAM_NOISE)), design.n)
    sample = design.with_responses(cfg.target(design.points) + noise)
    train, val = split_train_validation(sample, cfg.val_fraction, derive_seed(seed, run, STREAM_SPLIT))
    kernel = make_kernel(cfg.kernel, design.dim)
    cv = cross_validate(train, cfg.estimators, cfg.eps_grid, cfg.folds,
                        derive_seed(seed, run, STREAM_FOLDS), kernel)
    rows = []
    grid = cfg.maxe_grid
    for kind in cfg.estimators:
        eps = cv.chosen[kind]
        model = fit_estimator(kind, train, kernel, eps)
        rows.append(RunRow(run, kind, eps, compute_mse(model, val),
                           compute_maxe(model, cfg.target, grid)))
    return rows


def _run_guarded(args) -> list[RunRow]:
    cfg, run = args
    try:
        return _run_once(cfg, run)
    except Exception as exc:
        raise RunError(run, exc) from exc


def quartiles(values) -> dict:
    """Median and linear-interpolation quartiles."""
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3)}


@dataclass
class RunReport:
    """Per-run rows and their summary; see :meth:`summary` for the JSON layout."""

    rows: list[RunRow]
    estimators: tuple[str, ...]
    config: dict = field(default_factory=dict)
    rng: str = RNG_DESCRIPTION

    def metric(self, estimator: str, name: str) -> NDArray[np.float64]:
        rows = sorted((r for r in self.rows if r.estimator == estimator), key=lambda r: r.run)
        return np.array([getattr(r, name) for r in rows])

    def median(self, estimator: str, name: str) -> float:
        return float(np.median(self.metric(estimator, name)))

    def summary(self) -> dict:
        stats = {
            est: {m: quartiles(self.metric(est, m)) for m in ("eps", "mse", "maxe")}
            for est in self.estimators
        }
        tests = {}
        for a, b in itertools.combinations(self.estimators, 2):
            for m in ("mse", "maxe"):
                key = f"{a}-{b}:{m}"
                try:
                    res = wilcoxon_signed_rank(self.metric(a, m), self.metric(b, m))
                    tests[key] = {"statistic": res.statistic, "p_two_sided": res.p_two_sided,
                                  "n_used": res.n_used, "method": res.method}
                except PreconditionViolated as exc:
                    tests[key] = {"statistic": None, "p_two_sided": None, "reason": str(exc)}
        runs = len({r.run for r in self.rows})
        return {"runs": runs, "statistics": stats, "wilcoxon": tests, "rng": self.rng,
                "config": self.config}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "estimator", "eps", "mse", "maxe"])
            for r in sorted(self.rows, key=lambda r: (r.run, self.estimators.index(r.estimator))):
                w.writerow([r.run, r.estimator, repr(r.eps), repr(r.mse), repr(r.maxe)])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")


def run_benchmark(cfg: ExperimentConfig, workers: int = 1,
                  run_indices: Iterable[int] | None = None) -> RunReport:
    """Execute every run; any failing run aborts with :class:`RunError` naming it."""
    runs = list(range(cfg.runs) if run_indices is None else run_indices)
    jobs = [(cfg, r) for r in runs]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_guarded, jobs))
    else:
        results = [_run_guarded(j) for j in jobs]
    rows = [row for res in results for row in res]
    return RunReport(rows, cfg.estimators, cfg.to_dict())
