"""``ulcreg`` command line: partition, fit, simulate, benchmark and catalog subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from ..errors import UlcError
from ..experiments import PRESETS, ESTIMATORS, ExperimentConfig, fit_estimator
from ..kernels import make_kernel
from ..partition import BUILDERS, build_partition
from ..sample import Box, Lattice
from ..simulation import (
    STREAM_DESIGN,
    STREAM_NOISE,
    derive_seed,
    generate_design,
    generate_noise,
    synthetic_catalog,
)
from .catalog import CatalogConfig, clamp_cell_measures, run_catalog
from .io import (
    export_grid_csv,
    load_csv_dataset,
    read_grid_csv,
    read_points_csv,
    write_catalog_csv,
    write_partition_csv,
    write_points_csv,
)

__all__ = [
    "main", "build_parser", "clamp_cell_measures", "load_csv_dataset", "export_grid_csv",
    "read_grid_csv",
]


def _domain(text: str | None) -> Box | None:
    """``lo1,...,lok,hi1,...,hik`` or ``None``."""
    if text is None:
        return None
    vals = [float(v) for v in text.split(",")]
    if len(vals) % 2:
        raise UlcError("--domain needs an even number of values")
    k = len(vals) // 2
    return Box(vals[:k], vals[k:])


def _grid(text: str, domain: Box) -> Lattice:
    counts = [int(c) for c in text.lower().split("x")]
    if len(counts) == 1:
        counts = counts * domain.dim
    return Lattice(tuple(counts), domain)


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        raise UlcError("--config is required")
    if path in PRESETS:
        return PRESETS[path]()
    return ExperimentConfig.from_json(path)


def _cmd_partition(args) -> None:
    sample = read_points_csv(args.input, _domain(args.domain))
    part = build_partition(sample, args.method)
    if args.cap is not None:
        part = clamp_cell_measures(part, args.cap)
    write_partition_csv(part, args.output)


def _cmd_fit(args) -> None:
    sample = read_points_csv(args.input, _domain(args.domain))
    if sample.responses is None:
        raise UlcError(f"{args.input} has no y column")
    if args.eps is None:
        raise UlcError("--eps is required")
    kernel = make_kernel(args.kernel, sample.dim)
    model = fit_estimator(args.estimator, sample, kernel, args.eps, measure_cap=args.cap)
    grid = _grid(args.grid, sample.domain)
    export_grid_csv(model.evaluate_grid(grid), grid, args.output)


def _cmd_simulate(args) -> None:
    if args.synthetic_catalog:
        write_catalog_csv(synthetic_catalog(args.n or 10184, args.seed), args.output)
        return
    cfg = _load_config(args.config)
    design_cfg = cfg.design if args.n is None else replace(cfg.design, n=args.n)
    design = generate_design(design_cfg.with_seed(derive_seed(args.seed, args.run, STREAM_DESIGN)))
    noise = generate_noise(cfg.noise.with_seed(derive_seed(args.seed, args.run, STREAM_NOISE)),
                           design.n)
    write_points_csv(design.with_responses(cfg.target(design.points) + noise), args.output)


def _outputs(prefix: str) -> tuple[Path, Path]:
    base = Path(prefix)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    return base.with_suffix(".csv"), base.with_suffix(".json")


def _cmd_benchmark(args) -> None:
    from ..experiments import run_benchmark

    cfg = _load_config(args.config)
    over = {}
    if args.runs is not None:
        over["runs"] = args.runs
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.estimator:
        over["estimators"] = tuple(args.estimator)
    cfg = replace(cfg, **over)
    report = run_benchmark(cfg, workers=args.workers)
    csv_path, json_path = _outputs(args.output)
    report.to_csv(csv_path)
    report.to_json(json_path)
    _print_summary(report.summary())


def _cmd_catalog(args) -> None:
    sample = load_csv_dataset(args.input)
    cfg = CatalogConfig(
        runs=args.runs if args.runs is not None else 20,
        master_seed=args.seed if args.seed is not None else 0,
        estimators=tuple(args.estimator) if args.estimator else ESTIMATORS,
        measure_cap=args.cap,
    )
    report = run_catalog(sample, cfg)
    csv_path, json_path = _outputs(args.output)
    report.to_csv(csv_path)
    report.to_json(json_path)
    _print_summary(report.summary())


def _print_summary(summary: dict) -> None:
    for est, stats in summary["statistics"].items():
        parts = [f"{m} {s['median']:.4g} ({s['q1']:.4g}, {s['q3']:.4g})" for m, s in stats.items()]
        print(f"{est}: " + "; ".join(parts))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ulcreg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="cell measures and diameters of a points file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", choices=sorted(BUILDERS), default="voronoi2d")
    p.add_argument("--domain", help="lo1,...,lok,hi1,...,hik (default: padded bounding box); write --domain=-1,... "
                   "when the first value is negative")
    p.add_argument("--cap", type=float, help="clamp cell measures at this value")
    p.set_defaults(func=_cmd_partition)

    p = sub.add_parser("fit", help="fit one estimator and export its grid evaluations")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--estimator", choices=ESTIMATORS, default="ULCV")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--grid", default="100x100")
    p.add_argument("--kernel", default="tricubic")
    p.add_argument("--domain")
    p.add_argument("--cap", type=float)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="write one generated dataset")
    p.add_argument("--config", help="config JSON or a preset name (example1/2/3)")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--n", type=int)
    p.add_argument("--synthetic-catalog", action="store_true",
                   help="write a catalog-shaped longitude,latitude,mag file instead")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("benchmark", help="run an experiment config and write CSV/JSON reports")
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True, help="report path prefix")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--estimator", action="append", choices=ESTIMATORS)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("catalog", help="repeated-split evaluation on a longitude,latitude,mag file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="catalog_report")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--estimator", action="append", choices=ESTIMATORS)
    p.add_argument("--cap", type=float, default=1.0)
    p.set_defaults(func=_cmd_catalog)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (UlcError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"ulcreg {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
