import json

import numpy as np
import pytest

from imputebench.bench import (
    DatasetFormatError,
    DatasetRecord,
    discover_datasets,
    emit_report,
    imputation_accuracy,
    load_csv,
    load_mask_csv,
    render_table,
    rmse,
    run_benchmark,
    save_csv,
    save_mask_csv,
    standardize_observed,
)
from imputebench.core import DataMatrix, Mask, SeedSpec, apply_mask
from imputebench.datagen import LfmSpec, sample_lfm
from imputebench.imputers import ImputationResult, Imputer, make_imputer


def _lfm_record(name, seed, m=30, n=8, k=2):
    return DatasetRecord(
        name=name,
        path="<memory>",
        matrix=sample_lfm(LfmSpec(m=m, n=n, k=k), SeedSpec(seed, name)),
    )


class _TruthOracle(Imputer):
    """Test-only method that copies the ground truth back."""

    def run(self, ds, seed):
        completed = np.where(ds.mask.observed, ds.observed, ds.truth.values)
        return ImputationResult(
            DataMatrix(completed), DataMatrix(ds.truth.values), {"method": "oracle"}
        )


class _AlwaysFails(Imputer):
    def run(self, ds, seed):
        raise RuntimeError("deliberate failure")


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def test_load_csv_well_formed(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n3,4\n5,6\n")
    rec = load_csv(p)
    assert rec.name == "d"
    assert rec.columns == ("a", "b")
    assert rec.matrix.shape == (3, 2)
    assert rec.matrix.values[2, 1] == 6.0


def test_load_csv_rejects_empty_cell_with_location(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,\n3,4\n")
    with pytest.raises(DatasetFormatError) as err:
        load_csv(p)
    assert "row 0" in str(err.value) and "'b'" in str(err.value)


def test_load_csv_rejects_non_numeric(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,x\n")
    with pytest.raises(DatasetFormatError) as err:
        load_csv(p)
    assert "non-numeric" in str(err.value)


def test_load_csv_rejects_ragged_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2,3\n")
    with pytest.raises(DatasetFormatError):
        load_csv(p)


def test_save_load_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.normal(size=(7, 4)) * 1e3
    p = tmp_path / "rt.csv"
    save_csv(values, p, columns=list("wxyz"))
    rec = load_csv(p)
    assert np.array_equal(rec.matrix.values, values)
    assert rec.columns == ("w", "x", "y", "z")


def test_mask_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    mask = Mask((rng.random((6, 5)) < 0.6).astype(np.uint8))
    p = tmp_path / "m.csv"
    save_mask_csv(mask, p)
    back = load_mask_csv(p)
    assert np.array_equal(back.indicator, mask.indicator)


def test_discover_datasets_directory_and_manifest(tmp_path):
    save_csv(np.ones((3, 2)), tmp_path / "b.csv")
    save_csv(np.zeros((2, 2)), tmp_path / "a.csv")
    records = discover_datasets(tmp_path)
    assert [r.name for r in records] == ["a", "b"]

    manifest = tmp_path / "mf.json"
    manifest.write_text(json.dumps({
        "datasets": [{"name": "only", "path": "b.csv"}],
    }))
    records = discover_datasets(manifest)
    assert [r.name for r in records] == ["only"]

    with pytest.raises(DatasetFormatError):
        discover_datasets(tmp_path / "missing-dir.json")


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


def test_standardize_two_point_column():
    ds = apply_mask(DataMatrix([[0.0], [2.0]]), Mask([[1], [1]]))
    out, params = standardize_observed(ds)
    assert np.allclose(out.observed[:, 0], [-1.0, 1.0])
    assert params.mean[0] == 1.0 and params.scale[0] == 1.0


def test_standardize_is_idempotent_within_tolerance():
    rng = np.random.default_rng(3)
    truth = rng.normal(size=(40, 5)) * 3.0 + 7.0
    ds = apply_mask(DataMatrix(truth), Mask(np.ones((40, 5))))
    once, _ = standardize_observed(ds)
    twice, _ = standardize_observed(once)
    assert np.allclose(once.observed, twice.observed, atol=1e-10)


def test_standardize_constant_and_empty_columns():
    truth = np.column_stack([np.full(4, 5.0), np.arange(4.0), np.arange(4.0)])
    ind = np.ones((4, 3), dtype=np.uint8)
    ind[:, 2] = 0
    ds = apply_mask(DataMatrix(truth), Mask(ind))
    out, params = standardize_observed(ds)
    assert np.allclose(out.observed[:, 0], 0.0)  # constant -> centered, scale 1
    assert params.scale[0] == 1.0
    assert params.mean[2] == 0.0 and params.scale[2] == 1.0  # untouched column


def test_standardize_moves_truth_through_same_map():
    rng = np.random.default_rng(4)
    truth = rng.normal(size=(30, 4)) * 10
    ind = (rng.random((30, 4)) < 0.7).astype(np.uint8)
    ind[0, :] = 1
    ds = apply_mask(DataMatrix(truth), Mask(ind))
    out, params = standardize_observed(ds)
    obs = ds.mask.observed
    assert np.allclose(out.truth.values, params.apply(truth))
    for j in range(4):
        col = out.observed[obs[:, j], j]
        assert abs(col.mean()) < 1e-10
        assert abs(col.var() - 1.0) < 1e-8
    assert np.allclose(params.invert(out.truth.values), truth, atol=1e-10)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def test_rmse_zero_when_exact():
    t = DataMatrix([[1.0, 2.0]])
    assert rmse(t, t, Mask([[1, 0]])) == 0.0


def test_rmse_single_entry():
    t = DataMatrix([[1.0, 5.0]])
    c = DataMatrix([[1.0, 8.0]])
    assert rmse(t, c, Mask([[1, 0]])) == 3.0


def test_rmse_matches_two_pass_oracle():
    rng = np.random.default_rng(5)
    t = rng.normal(size=(9, 6))
    c = rng.normal(size=(9, 6))
    ind = (rng.random((9, 6)) < 0.5).astype(np.uint8)
    ind[0, 0] = 0
    got = rmse(DataMatrix(t), DataMatrix(c), Mask(ind))
    total, count = 0.0, 0
    for i in range(9):
        for j in range(6):
            if not ind[i, j]:
                total += (t[i, j] - c[i, j]) ** 2
                count += 1
    assert abs(got - np.sqrt(total / count)) < 1e-12


def test_rmse_requires_missing_entries():
    t = DataMatrix([[1.0]])
    with pytest.raises(ValueError):
        rmse(t, t, Mask([[1]]))


def test_accuracy_closed_form_and_ties():
    acc = imputation_accuracy({"a": 1.0, "b": 2.0, "c": 3.0})
    assert acc == {"a": 1.0, "b": 0.5, "c": 0.0}
    tied = imputation_accuracy({"a": 2.0, "b": 2.0})
    assert tied == {"a": 0.5, "b": 0.5}
    with pytest.raises(ValueError):
        imputation_accuracy({"a": 1.0})


def test_accuracy_affine_invariance():
    rng = np.random.default_rng(6)
    base = {f"m{i}": float(v) for i, v in enumerate(rng.random(5) + 0.5)}
    scaled = {k: 3.7 * v + 11.0 for k, v in base.items()}
    a1 = imputation_accuracy(base)
    a2 = imputation_accuracy(scaled)
    for k in base:
        assert abs(a1[k] - a2[k]) < 1e-12


# ---------------------------------------------------------------------------
# The grid
# ---------------------------------------------------------------------------


def test_oracle_method_always_scores_one():
    datasets = [_lfm_record("d0", 1), _lfm_record("d1", 2)]
    methods = [
        _TruthOracle(method="col-mean", name="oracle"),
        make_imputer("col-mean"),
    ]
    report = run_benchmark(datasets, ["mcar"], methods, n_seeds=2, seed=9)
    oracle_cells = [c for c in report.cells if c["method"] == "oracle"]
    assert oracle_cells and all(c["accuracy"] == 1.0 for c in oracle_cells)
    assert all(c["rmse"] == 0.0 for c in oracle_cells)


def test_group_accuracy_hits_both_bounds():
    datasets = [_lfm_record("d0", 3)]
    methods = [make_imputer("col-mean"), make_imputer("soft-impute"),
               make_imputer("knn")]
    report = run_benchmark(datasets, ["mcar"], methods, n_seeds=3, seed=10)
    by_group = {}
    for c in report.cells:
        by_group.setdefault((c["dataset"], c["pattern"], c["seed"]), []).append(
            c["accuracy"]
        )
    for accs in by_group.values():
        assert max(accs) == 1.0 and min(accs) == 0.0


def test_grid_is_deterministic_across_parallelism():
    datasets = [_lfm_record("d0", 4), _lfm_record("d1", 5)]
    methods = [make_imputer("col-mean"), make_imputer("soft-impute"),
               make_imputer("ice")]
    kwargs = dict(patterns=["mcar", "panel"], n_seeds=2, seed=11)
    r1 = run_benchmark(datasets, methods=methods, jobs=1, **kwargs)
    r8 = run_benchmark(datasets, methods=methods, jobs=8, **kwargs)
    c1 = json.dumps(r1.cells, sort_keys=True)
    c8 = json.dumps(r8.cells, sort_keys=True)
    assert c1 == c8


def test_mcar_zero_rate_rejected_up_front():
    datasets = [_lfm_record("d0", 6)]
    methods = [make_imputer("col-mean"), make_imputer("knn")]
    with pytest.raises(ValueError):
        run_benchmark(datasets, [("mcar", {"p_missing": 0.0})], methods)


def test_group_dropped_when_fewer_than_two_methods_survive():
    datasets = [_lfm_record("d0", 7)]
    methods = [
        make_imputer("col-mean"),
        _AlwaysFails(method="col-mean", name="broken"),
    ]
    with pytest.warns(UserWarning):
        with pytest.raises(ValueError):
            # both groups lose their only comparison partner -> nothing left
            run_benchmark(datasets, ["mcar"], methods, n_seeds=1, seed=12)


def test_failed_method_excluded_from_normalization():
    datasets = [_lfm_record("d0", 8)]
    methods = [
        make_imputer("col-mean"),
        make_imputer("soft-impute"),
        _AlwaysFails(method="col-mean", name="broken"),
    ]
    report = run_benchmark(datasets, ["mcar"], methods, n_seeds=1, seed=13)
    broken = [c for c in report.cells if c["method"] == "broken"]
    assert all(c["error"] is not None and c["accuracy"] is None for c in broken)
    survivors = [c for c in report.cells if c["method"] != "broken"]
    assert sorted(c["accuracy"] for c in survivors) == [0.0, 1.0]


def test_config_validation():
    ds = [_lfm_record("d0", 9)]
    methods = [make_imputer("col-mean"), make_imputer("knn")]
    with pytest.raises(ValueError):
        run_benchmark([], ["mcar"], methods)
    with pytest.raises(ValueError):
        run_benchmark(ds, [], methods)
    with pytest.raises(ValueError):
        run_benchmark(ds, ["mcar"], methods[:1])
    with pytest.raises(ValueError):
        run_benchmark(ds, ["mcar"], [make_imputer("col-mean"),
                                     make_imputer("col-mean")])


def test_adaptive_proportions_trajectory():
    datasets = [_lfm_record("d0", 10)]
    methods = [make_imputer("col-mean"), make_imputer("soft-impute")]
    report = run_benchmark(
        datasets, ["mcar", "panel"], methods, n_seeds=1, seed=14,
        adaptive_proportions=True,
    )
    traj = report.proportion_trajectory
    assert [t["step"] for t in traj] == [0, 50, 100]
    assert np.allclose(list(traj[0]["proportions"].values()), 0.5)
    for entry in traj:
        assert abs(sum(entry["proportions"].values()) - 1.0) < 1e-9


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _small_report():
    datasets = [_lfm_record("d0", 15)]
    methods = [make_imputer("col-mean"), make_imputer("soft-impute")]
    return run_benchmark(datasets, ["mcar", "panel"], methods, n_seeds=2, seed=16)


def test_emit_report_round_trips_full_precision(tmp_path):
    report = _small_report()
    json_path, csv_path = emit_report(report, tmp_path)
    doc = json.loads(json_path.read_text())
    for parsed, original in zip(doc["cells"], report.cells):
        assert parsed["rmse"] == original["rmse"]
        assert parsed["accuracy"] == original["accuracy"]
    assert csv_path.exists()


def test_emit_report_is_byte_stable(tmp_path):
    report = _small_report()
    p1, _ = emit_report(report, tmp_path / "a")
    p2, _ = emit_report(report, tmp_path / "b")
    assert p1.read_bytes() == p2.read_bytes()


def test_report_table_layout():
    report = _small_report()
    rows = render_table(report.aggregates, ["col-mean", "soft-impute"])
    assert rows[0] == ["pattern", "col-mean", "soft-impute"]
    assert [r[0] for r in rows[1:]] == ["mcar", "panel", "Overall"]
    for row in rows[1:]:
        for cell in row[1:]:
            assert "±" in cell


def test_emit_report_rejects_empty(tmp_path):
    report = _small_report()
    empty = type(report)(
        config=report.config, cells=[], aggregates={}, timings=[],
        dropped_groups=[],
    )
    with pytest.raises(ValueError):
        emit_report(empty, tmp_path)
