"""Benchmark harness: dataset ingestion, standardization, the evaluation
grid, accuracy scoring, and report emission.

For every (dataset, pattern, replicate) group the harness generates one
mask, standardizes the masked dataset on its observed entries, runs every
method on that identical input, and min-max normalizes the per-method RMSE
into an accuracy in [0, 1]. All group randomness derives from
(run seed, dataset name, pattern, replicate), so adding a dataset or
changing parallelism never perturbs another group's numbers. Wall-clock
timings are reported in a sidecar array rather than inside the cells, which
keeps the cells byte-identical across reruns.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .core import DataMatrix, Mask, MaskedDataset, SeedSpec, apply_mask
from .imputers import Imputer
from .missingness import PATTERN_TAGS, PatternSpec, generate
from .scheduler import step as scheduler_step
from .scheduler import uniform_state

__all__ = [
    "BenchReport",
    "ColumnStandardization",
    "DatasetFormatError",
    "DatasetRecord",
    "discover_datasets",
    "emit_report",
    "imputation_accuracy",
    "load_csv",
    "load_mask_csv",
    "read_data_csv",
    "rmse",
    "run_benchmark",
    "save_csv",
    "save_mask_csv",
    "standardize_observed",
]

SCHEMA_VERSION = "1"


class DatasetFormatError(ValueError):
    """A dataset file violates the numeric-CSV contract."""


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetRecord:
    """A named, fully observed numeric table ready for the grid."""

    name: str
    path: str
    matrix: DataMatrix
    columns: tuple[str, ...] = ()
    note: str = ""


def read_data_csv(path: Union[str, Path]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Parse a data CSV (header + numeric cells; empty cell = missing NaN)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: file is empty") from None
        rows = []
        for r, row in enumerate(reader):
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: row {r} has {len(row)} cells, header has {len(header)}"
                )
            parsed = []
            for c, cell in enumerate(row):
                text = cell.strip()
                if text == "":
                    parsed.append(np.nan)
                    continue
                try:
                    parsed.append(float(text))
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: non-numeric cell at row {r}, column "
                        f"{header[c]!r}: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return np.array(rows, dtype=float), tuple(h.strip() for h in header)


def load_csv(path: Union[str, Path], name: Optional[str] = None) -> DatasetRecord:
    """Load a benchmark dataset, rejecting any pre-existing missing cell."""
    path = Path(path)
    values, columns = read_data_csv(path)
    holes = np.argwhere(np.isnan(values))
    if holes.size:
        listed = ", ".join(
            f"(row {r}, column {columns[c]!r})" for r, c in holes[:10]
        )
        more = "" if holes.shape[0] <= 10 else f" and {holes.shape[0] - 10} more"
        raise DatasetFormatError(
            f"{path}: benchmark datasets must be fully observed; found "
            f"{holes.shape[0]} empty cells at {listed}{more}"
        )
    return DatasetRecord(
        name=name or path.stem,
        path=str(path),
        matrix=DataMatrix(values),
        columns=columns,
    )


def save_csv(
    values: np.ndarray,
    path: Union[str, Path],
    columns: Optional[Sequence[str]] = None,
) -> None:
    """Write a data CSV; NaN becomes an empty cell, floats keep full precision."""
    values = np.asarray(values, dtype=float)
    if columns is None:
        columns = [f"x{j}" for j in range(values.shape[1])]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in values:
            writer.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


def load_mask_csv(path: Union[str, Path]) -> Mask:
    """Read a headerless 0/1 CSV as a Mask."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [[cell.strip() for cell in row] for row in csv.reader(fh) if row]
    if not rows:
        raise DatasetFormatError(f"{path}: mask file is empty")
    try:
        arr = np.array([[int(c) for c in row] for row in rows])
    except ValueError:
        raise DatasetFormatError(f"{path}: mask cells must be 0 or 1") from None
    try:
        return Mask(arr)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None


def save_mask_csv(mask: Mask, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in mask.indicator:
            writer.writerow([int(v) for v in row])


def discover_datasets(path: Union[str, Path]) -> list[DatasetRecord]:
    """Load every dataset under a directory, or the entries of a JSON manifest.

    A manifest is {"datasets": [{"name": ..., "path": ...}, ...]} with paths
    resolved relative to the manifest file.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"{path}: no such file or directory")
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise DatasetFormatError(f"{path}: no .csv files found")
        return [load_csv(f) for f in files]
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        entries = doc.get("datasets")
        if not isinstance(entries, list) or not entries:
            raise DatasetFormatError(f"{path}: manifest needs a 'datasets' list")
        records = []
        for entry in entries:
            csv_path = Path(entry["path"])
            if not csv_path.is_absolute():
                csv_path = path.parent / csv_path
            records.append(load_csv(csv_path, name=entry.get("name")))
        return records
    raise DatasetFormatError(f"{path}: expected a directory or a .json manifest")


# ---------------------------------------------------------------------------
# Standardization and metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnStandardization:
    """Per-column affine map (x - mean) / scale and its inverse."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.scale

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.scale + self.mean


def standardize_observed(
    ds: MaskedDataset,
) -> tuple[MaskedDataset, ColumnStandardization]:
    """Re-center and re-scale each column on its observed entries.

    Observed entries end up with mean 0 and population variance 1; a column
    with no observed entries, a single one, or zero spread keeps scale 1.
    The ground truth (when present) moves through the same affine map.
    """
    obs = ds.mask.observed
    m, n = ds.shape
    mean = np.zeros(n)
    scale = np.ones(n)
    for j in range(n):
        vals = ds.observed[obs[:, j], j]
        if vals.size == 0:
            continue
        mean[j] = vals.mean()
        var = vals.var()
        if var > 0:
            scale[j] = np.sqrt(var)
    params = ColumnStandardization(mean=mean, scale=scale)
    observed = np.where(obs, params.apply(np.where(obs, ds.observed, 0.0)), np.nan)
    truth = DataMatrix(params.apply(ds.truth.values)) if ds.truth is not None else None
    return MaskedDataset(mask=ds.mask, observed=observed, truth=truth), params


def rmse(truth: DataMatrix, completed: DataMatrix, mask: Mask) -> float:
    """Root mean squared error over the missing entries only."""
    if truth.shape != completed.shape or truth.shape != mask.shape:
        raise ValueError(
            f"shape mismatch: truth {truth.shape}, completed {completed.shape}, "
            f"mask {mask.shape}"
        )
    missing = mask.missing
    if not missing.any():
        raise ValueError("RMSE is undefined with no missing entries")
    diff = truth.values[missing] - completed.values[missing]
    return float(np.sqrt(np.mean(diff**2)))


def imputation_accuracy(rmse_by_method: Mapping[str, float]) -> dict[str, float]:
    """Min-max normalize RMSEs across methods into 1 - normalized RMSE.

    The best method maps to 1, the worst to 0; when every method ties the
    whole group scores 0.5.
    """
    if len(rmse_by_method) < 2:
        raise ValueError("accuracy needs at least 2 methods to normalize over")
    values = np.array(list(rmse_by_method.values()), dtype=float)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return {name: 0.5 for name in rmse_by_method}
    return {
        name: float(1.0 - (r - lo) / (hi - lo)) for name, r in rmse_by_method.items()
    }


# ---------------------------------------------------------------------------
# The grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    """Everything the grid produced, ready for serialization."""

    config: dict
    cells: list
    aggregates: dict
    timings: list
    dropped_groups: list
    proportion_trajectory: Optional[list] = None


def _dataset_digest(ds: MaskedDataset) -> str:
    h = hashlib.sha256()
    h.update(ds.mask.indicator.tobytes())
    h.update(ds.observed.tobytes())
    return h.hexdigest()[:12]


def _scalar_diagnostics(diag: Mapping) -> dict:
    keep = {}
    for key, value in diag.items():
        if isinstance(value, (bool, int, str)) or value is None:
            keep[key] = value
        elif isinstance(value, float):
            keep[key] = float(value)
    return keep


@dataclass
class _GroupResult:
    dataset: str
    pattern: str
    replicate: int
    cells: list
    timings: list
    dropped: Optional[dict]


def _run_group(
    dataset: DatasetRecord,
    pattern: str,
    params: Mapping,
    replicate: int,
    run_seed: int,
    methods: Sequence[Imputer],
) -> _GroupResult:
    group_seed = SeedSpec(run_seed, f"{dataset.name}/{pattern}/{replicate}")
    base = {"dataset": dataset.name, "pattern": pattern, "seed": replicate}
    try:
        spec = PatternSpec(pattern, group_seed.child("mask"), dict(params))
        mask = generate(spec, dataset.matrix)
        if mask.n_missing == 0:
            raise ValueError("pattern produced no missing entries")
        masked = apply_mask(dataset.matrix, mask)
        ds, _ = standardize_observed(masked)
    except Exception as exc:  # mask-level failure drops the whole group
        return _GroupResult(
            dataset.name, pattern, replicate, [], [],
            dropped={**base, "reason": f"mask generation failed: {exc}"},
        )
    digest = _dataset_digest(ds)
    cells, timings, rmses = [], [], {}
    for method in methods:
        cell = {
            **base,
            "method": method.name,
            "input_digest": digest,
            "rmse": None,
            "accuracy": None,
            "diagnostics": {},
            "error": None,
        }
        t0 = time.perf_counter()
        try:
            result = method.run(ds, group_seed.child(method.name))
            elapsed = time.perf_counter() - t0
            if _dataset_digest(ds) != digest:
                raise RuntimeError(f"method {method.name} mutated its input")
            cell["rmse"] = rmse(ds.truth, result.completed, ds.mask)
            cell["diagnostics"] = _scalar_diagnostics(result.diagnostics)
            rmses[method.name] = cell["rmse"]
        except Exception as exc:
            elapsed = time.perf_counter() - t0
            cell["error"] = f"{type(exc).__name__}: {exc}"
        cells.append(cell)
        timings.append(
            {
                "seconds": elapsed,
                "seconds_per_entry": elapsed / ds.observed.size,
            }
        )
    dropped = None
    if len(rmses) >= 2:
        acc = imputation_accuracy(rmses)
        for cell in cells:
            if cell["error"] is None:
                cell["accuracy"] = acc[cell["method"]]
    else:
        dropped = {
            **base,
            "reason": f"only {len(rmses)} methods survived; need 2 to normalize",
        }
        cells, timings = [], []
    return _GroupResult(dataset.name, pattern, replicate, cells, timings, dropped)


def _normalize_patterns(
    patterns: Sequence[Union[str, tuple[str, Mapping]]]
) -> list[tuple[str, dict]]:
    out = []
    for entry in patterns:
        if isinstance(entry, str):
            tag, params = entry, {}
        else:
            tag, params = entry[0], dict(entry[1])
        probe = PatternSpec(tag, SeedSpec(0, "validate"), params)
        resolved = probe.resolved_params()
        if resolved.get("p_missing") == 0:
            raise ValueError(
                f"pattern {tag!r} with p_missing=0 produces no missing entries"
            )
        out.append((tag, params))
    return out


def _aggregate(cells: Sequence[dict], methods: Sequence[str]) -> dict:
    def stats(values: list[float]) -> dict:
        arr = np.array(values, dtype=float)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return {"mean": float(arr.mean()), "std": std, "n_groups": int(arr.size)}

    per_pattern: dict[str, dict] = {}
    overall: dict[str, dict] = {}
    for method in methods:
        scores = [c["accuracy"] for c in cells
                  if c["method"] == method and c["accuracy"] is not None]
        if scores:
            overall[method] = stats(scores)
    for cell in cells:
        if cell["accuracy"] is None:
            continue
        per_pattern.setdefault(cell["pattern"], {}).setdefault(
            cell["method"], []
        ).append(cell["accuracy"])
    return {
        "per_pattern": {
            pattern: {m: stats(vals) for m, vals in by_method.items()}
            for pattern, by_method in per_pattern.items()
        },
        "overall": overall,
        "std_convention": "sample std (ddof=1) across (dataset, replicate) groups",
    }


def run_benchmark(
    datasets: Sequence[DatasetRecord],
    patterns: Sequence[Union[str, tuple[str, Mapping]]],
    methods: Sequence[Imputer],
    n_seeds: int = 5,
    seed: int = 0,
    jobs: int = 1,
    adaptive_proportions: bool = False,
    temperature: float = 1.0,
) -> BenchReport:
    """Evaluate every method on every (dataset, pattern, replicate) group.

    Output is deterministic for a fixed seed regardless of ``jobs``: group
    seeds derive from (seed, dataset name, pattern, replicate) and results
    are assembled in canonical grid order.
    """
    if not datasets:
        raise ValueError("need at least one dataset")
    if not patterns:
        raise ValueError("need at least one pattern")
    if len(methods) < 2:
        raise ValueError("need at least two methods for accuracy normalization")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError(f"method names must be unique, got {names}")
    dataset_names = [d.name for d in datasets]
    if len(set(dataset_names)) != len(dataset_names):
        # duplicate names would share group seed streams and report keys
        raise ValueError(f"dataset names must be unique, got {dataset_names}")
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    norm_patterns = _normalize_patterns(patterns)

    tasks = [
        (dataset, tag, params, replicate)
        for dataset in datasets
        for tag, params in norm_patterns
        for replicate in range(n_seeds)
    ]
    if jobs == 1:
        results = [
            _run_group(d, tag, params, rep, seed, methods)
            for d, tag, params, rep in tasks
        ]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    lambda t: _run_group(t[0], t[1], t[2], t[3], seed, methods),
                    tasks,
                )
            )

    cells, timings, dropped = [], [], []
    for res in results:
        cells.extend(res.cells)
        timings.extend(res.timings)
        if res.dropped is not None:
            dropped.append(res.dropped)
    for index, timing in enumerate(timings):
        timing["index"] = index
    if dropped:
        warnings.warn(f"{len(dropped)} groups dropped; see report dropped_groups")
    if not cells:
        raise ValueError("every group was dropped; nothing to aggregate")

    aggregates = _aggregate(cells, names)
    trajectory = None
    if adaptive_proportions:
        trajectory = _proportion_trajectory(cells, [t for t, _ in norm_patterns],
                                            temperature)
    config = {
        "schema_version": SCHEMA_VERSION,
        "datasets": [d.name for d in datasets],
        "patterns": [
            {"pattern": tag, "overrides": params} for tag, params in norm_patterns
        ],
        "methods": [
            {"name": m.name, "method": m.method,
             "params": _scalar_diagnostics(m.params)}
            for m in methods
        ],
        "n_seeds": n_seeds,
        "seed": seed,
    }
    return BenchReport(
        config=config,
        cells=cells,
        aggregates=aggregates,
        timings=timings,
        dropped_groups=dropped,
        proportion_trajectory=trajectory,
    )


def _proportion_trajectory(
    cells: Sequence[dict], patterns: Sequence[str], temperature: float
) -> list[dict]:
    """Replay the proportion scheduler against the grid's per-pattern RMSE."""
    mean_rmse = {}
    for tag in patterns:
        vals = [c["rmse"] for c in cells if c["pattern"] == tag and c["rmse"] is not None]
        mean_rmse[tag] = float(np.mean(vals)) if vals else 0.0
    state = uniform_state(patterns, period=50, temperature=temperature)
    trajectory = [{"step": 0, "proportions": state.as_mapping()}]
    for _ in range(2 * state.period):
        state = scheduler_step(state, lambda tag: mean_rmse[tag])
        if state.step_count % state.period == 0:
            trajectory.append(
                {"step": state.step_count, "proportions": state.as_mapping()}
            )
    return trajectory


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _report_document(report: BenchReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": report.config,
        "cells": report.cells,
        "aggregates": report.aggregates,
        "dropped_groups": report.dropped_groups,
        "proportion_trajectory": report.proportion_trajectory,
        "timings": report.timings,
    }


def render_table(aggregates: Mapping, methods: Sequence[str]) -> list[list[str]]:
    """Rows = patterns plus Overall, columns = methods, cells mean ± std."""
    rows = [["pattern", *methods]]
    for pattern in sorted(aggregates["per_pattern"]):
        by_method = aggregates["per_pattern"][pattern]
        row = [pattern]
        for method in methods:
            entry = by_method.get(method)
            row.append(
                f"{entry['mean']:.3f} ± {entry['std']:.3f}" if entry else ""
            )
        rows.append(row)
    overall = ["Overall"]
    for method in methods:
        entry = aggregates["overall"].get(method)
        overall.append(f"{entry['mean']:.3f} ± {entry['std']:.3f}" if entry else "")
    rows.append(overall)
    return rows


def emit_report(report: BenchReport, out_dir: Union[str, Path]) -> tuple[Path, Path]:
    """Write report.json and report.csv; byte-stable for an equal report."""
    if not report.cells:
        raise ValueError("report has no cells to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    csv_path = out_dir / "report.csv"
    json_path.write_text(
        json.dumps(_report_document(report), sort_keys=True, indent=2) + "\n"
    )
    methods = [m["name"] for m in report.config["methods"]]
    with csv_path.open("w", newline="") as fh:
        csv.writer(fh).writerows(render_table(report.aggregates, methods))
    return json_path, csv_path
