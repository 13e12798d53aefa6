"""Command-line interface: gen, mask, impute, bench, and report subcommands.

Exit codes: 0 on success, 2 on configuration or input errors, 3 when the
benchmark finished but had to drop groups or record method failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .core import DataMatrix, Mask, MaskedDataset, SeedSpec
from .datagen import LfmSpec, parse_distribution, sample_lfm
from .imputers import METHOD_TAGS, make_imputer
from .missingness import PATTERN_TAGS, PatternSpec, generate


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected lo:hi, got {text!r}"
        ) from None


def _parse_cols(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated column indices, got {text!r}"
        ) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imputebench",
        description="Masked-matrix imputation benchmark toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="sample a low-rank synthetic dataset to CSV")
    gen.add_argument("--rows", type=int, required=True)
    gen.add_argument("--cols", type=int, required=True)
    gen.add_argument("--rank", type=int, required=True)
    gen.add_argument("--row-dist", default="gaussian",
                     help="e.g. gaussian, laplace:2, student-t:5, "
                          "spike-slab:0.3:1, dirichlet:0.5")
    gen.add_argument("--col-dist", default="gaussian")
    gen.add_argument("--noise-scale", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--out", required=True, help="output data CSV path")

    mask = sub.add_parser("mask", help="generate a missingness mask for a data CSV")
    mask.add_argument("--data", required=True, help="input data CSV (fully observed)")
    mask.add_argument("--pattern", required=True, choices=PATTERN_TAGS)
    mask.add_argument("--seed", type=int, default=42)
    mask.add_argument("--out", required=True, help="output mask CSV path")
    mask.add_argument("--sidecar", default=None,
                      help="parameters JSON path (default: <out>.json)")
    hp = mask.add_argument_group("pattern hyperparameters (pattern-specific)")
    hp.add_argument("--p-missing", type=float, dest="p_missing")
    hp.add_argument("--predictor-fraction", type=float, dest="predictor_fraction")
    hp.add_argument("--neighborhood-size-range", type=_parse_range,
                    dest="neighborhood_size_range", metavar="LO:HI")
    hp.add_argument("--layer-range", type=_parse_range, dest="layer_range",
                    metavar="LO:HI")
    hp.add_argument("--width-range", type=_parse_range, dest="width_range",
                    metavar="LO:HI")
    hp.add_argument("--target-cols", type=_parse_cols, dest="target_cols",
                    metavar="J1,J2,...")
    hp.add_argument("--q-censor", type=float, dest="q_censor")
    hp.add_argument("--q-thresh", type=float, dest="q_thresh")
    hp.add_argument("--alpha", type=float, dest="alpha")
    hp.add_argument("--eps", type=float, dest="eps")
    hp.add_argument("--k-low", type=int, dest="k_low")
    hp.add_argument("--k-high", type=int, dest="k_high")
    hp.add_argument("--n-row-clusters", type=int, dest="n_row_clusters")
    hp.add_argument("--n-col-clusters", type=int, dest="n_col_clusters")
    hp.add_argument("--tau-r", type=float, dest="tau_r")
    hp.add_argument("--tau-c", type=float, dest="tau_c")
    hp.add_argument("--eps-std", type=float, dest="eps_std")
    hp.add_argument("--f-cheap", type=float, dest="f_cheap")
    hp.add_argument("--beta", type=float, dest="beta")
    hp.add_argument("--n-row-blocks", type=int, dest="n_row_blocks")
    hp.add_argument("--n-col-blocks", type=int, dest="n_col_blocks")
    hp.add_argument("--conv", dest="conv")
    hp.add_argument("--algorithm", dest="algorithm")
    hp.add_argument("--epsilon", type=float, dest="epsilon")
    hp.add_argument("--epsilon-decay", type=float, dest="epsilon_decay")
    hp.add_argument("--pooling", action="store_const", const=True, dest="pooling")
    hp.add_argument("--reward-noise-scale", type=float, dest="reward_noise_scale")

    imp = sub.add_parser("impute", help="complete a data CSV with one method")
    imp.add_argument("--data", required=True,
                     help="data CSV; empty cells mark missing entries")
    imp.add_argument("--mask", default=None,
                     help="optional mask CSV; defaults to the data's empty cells")
    imp.add_argument("--method", required=True, choices=METHOD_TAGS)
    imp.add_argument("--out", required=True, help="completed CSV path")
    imp.add_argument("--diagnostics", default=None,
                     help="diagnostics JSON path (default: <out>.json)")
    imp.add_argument("--seed", type=int, default=0)
    imp.add_argument("--k", type=int, default=None, help="knn neighbor count")
    imp.add_argument("--lambda", type=float, default=None, dest="lam",
                     help="soft-impute shrinkage")
    imp.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    imp.add_argument("--tol", type=float, default=None)
    imp.add_argument("--ridge-lambda", type=float, default=None, dest="ridge_lambda")
    imp.add_argument("--base-a", default=None, dest="base_a", choices=METHOD_TAGS)
    imp.add_argument("--base-b", default=None, dest="base_b", choices=METHOD_TAGS)
    imp.add_argument("--perms", type=int, default=None, dest="n_perms")

    bch = sub.add_parser("bench", help="run the evaluation grid")
    bch.add_argument("--datasets", required=True,
                     help="directory of CSVs or a JSON manifest")
    bch.add_argument("--patterns", default="all",
                     help="comma-separated pattern tags, or 'all'")
    bch.add_argument("--methods", default="col-mean,knn,soft-impute,ice",
                     help="comma-separated method tags")
    bch.add_argument("--seeds", type=int, default=5, help="replicates per group")
    bch.add_argument("--seed", type=int, default=0, help="run seed")
    bch.add_argument("--jobs", type=int, default=1)
    bch.add_argument("--out", required=True, help="output directory")
    bch.add_argument("--adaptive-proportions", action="store_true")
    bch.add_argument("--temperature", type=float, default=1.0,
                     help="softmax temperature for the proportion trajectory")

    rep = sub.add_parser("report", help="re-render a report.json")
    rep.add_argument("--report", required=True, dest="report_path")
    rep.add_argument("--out", default=None, help="write the table CSV here")

    return parser


_MASK_PARAM_KEYS = (
    "p_missing", "predictor_fraction", "neighborhood_size_range", "layer_range",
    "width_range", "target_cols", "q_censor", "q_thresh", "alpha", "eps",
    "k_low", "k_high", "n_row_clusters", "n_col_clusters", "tau_r", "tau_c",
    "eps_std", "f_cheap", "beta", "n_row_blocks", "n_col_blocks", "conv",
    "algorithm", "epsilon", "epsilon_decay", "pooling", "reward_noise_scale",
)

_METHOD_PARAM_KEYS = (
    "k", "lam", "max_iter", "tol", "ridge_lambda", "base_a", "base_b", "n_perms",
)


def _cmd_gen(args) -> int:
    spec = LfmSpec(
        m=args.rows,
        n=args.cols,
        k=args.rank,
        row_dist=parse_distribution(args.row_dist),
        col_dist=parse_distribution(args.col_dist),
        noise_scale=args.noise_scale,
    )
    matrix = sample_lfm(spec, SeedSpec(args.seed, "gen"))
    bench_mod.save_csv(matrix.values, args.out)
    print(f"wrote {args.rows}x{args.cols} rank-{args.rank} dataset to {args.out}")
    return 0


def _cmd_mask(args) -> int:
    record = bench_mod.load_csv(args.data)
    overrides = {
        key: getattr(args, key)
        for key in _MASK_PARAM_KEYS
        if getattr(args, key) is not None
    }
    spec = PatternSpec(args.pattern, SeedSpec(args.seed, args.pattern), overrides)
    mask = generate(spec, record.matrix)
    bench_mod.save_mask_csv(mask, args.out)
    sidecar = Path(args.sidecar) if args.sidecar else Path(str(args.out) + ".json")
    resolved = {
        k: (list(v) if isinstance(v, tuple) else v)
        for k, v in spec.resolved_params().items()
    }
    sidecar.write_text(
        json.dumps(
            {
                "pattern": args.pattern,
                "seed": args.seed,
                "data": str(args.data),
                "shape": list(mask.shape),
                "params": resolved,
                "missing_fraction": mask.n_missing / mask.indicator.size,
            },
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )
    print(
        f"wrote mask {mask.shape[0]}x{mask.shape[1]} "
        f"({mask.n_missing} missing) to {args.out}"
    )
    return 0


def _cmd_impute(args) -> int:
    values, columns = bench_mod.read_data_csv(args.data)
    if args.mask:
        mask = bench_mod.load_mask_csv(args.mask)
        if mask.shape != values.shape:
            raise ValueError(
                f"mask shape {mask.shape} does not match data {values.shape}"
            )
        if np.isnan(values)[mask.observed].any():
            raise ValueError("mask marks cells observed that are empty in the data")
    else:
        mask = Mask((~np.isnan(values)).astype(np.uint8))
    ds = MaskedDataset(
        mask=mask, observed=np.where(mask.observed, values, np.nan), truth=None
    )
    overrides = {
        key: getattr(args, key)
        for key in _METHOD_PARAM_KEYS
        if getattr(args, key) is not None
    }
    imputer = make_imputer(args.method, **overrides)
    result = imputer.run(ds, SeedSpec(args.seed, f"impute/{args.method}"))
    bench_mod.save_csv(result.completed.values, args.out, columns)
    diag_path = Path(args.diagnostics) if args.diagnostics else Path(str(args.out) + ".json")
    diag_path.write_text(
        json.dumps(
            {
                "method": args.method,
                "params": {k: v for k, v in imputer.params.items()},
                "seed": args.seed,
                "diagnostics": result.diagnostics,
                "n_imputed": int(mask.n_missing),
            },
            sort_keys=True,
            indent=2,
            default=str,
        )
        + "\n"
    )
    print(f"imputed {mask.n_missing} entries with {args.method} into {args.out}")
    return 0


def _cmd_bench(args) -> int:
    datasets = bench_mod.discover_datasets(args.datasets)
    if args.patterns.strip() == "all":
        patterns = list(PATTERN_TAGS)
    else:
        patterns = [p.strip() for p in args.patterns.split(",") if p.strip()]
    methods = [
        make_imputer(tag.strip())
        for tag in args.methods.split(",")
        if tag.strip()
    ]
    report = bench_mod.run_benchmark(
        datasets,
        patterns,
        methods,
        n_seeds=args.seeds,
        seed=args.seed,
        jobs=args.jobs,
        adaptive_proportions=args.adaptive_proportions,
        temperature=args.temperature,
    )
    json_path, csv_path = bench_mod.emit_report(report, args.out)
    for row in bench_mod.render_table(
        report.aggregates, [m.name for m in methods]
    ):
        print("  ".join(f"{cell:<22}" for cell in row).rstrip())
    print(f"wrote {json_path} and {csv_path}")
    failures = [c for c in report.cells if c["error"] is not None]
    if report.dropped_groups or failures:
        print(
            f"partial failure: {len(report.dropped_groups)} dropped groups, "
            f"{len(failures)} failed cells",
            file=sys.stderr,
        )
        return 3
    return 0


def _cmd_report(args) -> int:
    doc = json.loads(Path(args.report_path).read_text())
    methods = [m["name"] for m in doc["config"]["methods"]]
    rows = bench_mod.render_table(doc["aggregates"], methods)
    for row in rows:
        print("  ".join(f"{cell:<22}" for cell in row).rstrip())
    if args.out:
        import csv as _csv

        with Path(args.out).open("w", newline="") as fh:
            _csv.writer(fh).writerows(rows)
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "mask": _cmd_mask,
    "impute": _cmd_impute,
    "bench": _cmd_bench,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
