import numpy as np
import pytest

from imputebench.core import DataMatrix, Mask, apply_mask
from imputebench.featurize import (
    SingularSystemError,
    build_features,
    ridge_on_features,
    _ridge_fit_predict,
)


def _masked(values, indicator):
    return apply_mask(DataMatrix(values), Mask(indicator))


def _reference_table(ds):
    """Double-loop construction of the feature table."""
    m, n = ds.shape
    x = ds.observed
    rows = []
    targets = []
    cells = []
    for i in range(m):
        for j in range(n):
            rows.append(np.concatenate([[i, j], x[i, :], x[:, j]]))
            targets.append(x[i, j])
            cells.append((i, j))
    return np.array(rows), np.array(targets), cells


def test_two_by_two_fully_observed_rows():
    ds = _masked([[1.0, 2.0], [3.0, 4.0]], np.ones((2, 2)))
    ft = build_features(ds)
    assert ft.features.shape == (4, 6)
    assert ft.features[1].tolist() == [0.0, 1.0, 1.0, 2.0, 2.0, 4.0]
    assert ft.test_rows.size == 0
    assert np.array_equal(ft.train_rows, np.arange(4))


def test_feature_table_matches_double_loop_oracle():
    rng = np.random.default_rng(8)
    truth = rng.normal(size=(6, 5))
    ind = np.ones(30, dtype=np.uint8)
    ind[rng.choice(30, size=9, replace=False)] = 0
    ds = _masked(truth, ind.reshape(6, 5))
    ft = build_features(ds)
    ref_feats, ref_targets, ref_cells = _reference_table(ds)
    assert ft.features.shape == (30, 6 + 5 + 2 - 0 - 0)
    assert np.array_equal(np.isnan(ft.features), np.isnan(ref_feats))
    assert np.array_equal(
        np.nan_to_num(ft.features, nan=-123.0), np.nan_to_num(ref_feats, nan=-123.0)
    )
    assert np.array_equal(
        np.nan_to_num(ft.targets, nan=-123.0), np.nan_to_num(ref_targets, nan=-123.0)
    )
    assert [tuple(c) for c in ft.cell_index] == ref_cells
    assert ft.test_rows.size == 9
    assert ft.train_rows.size == 21


def test_width_is_m_plus_n_plus_two():
    rng = np.random.default_rng(9)
    for m, n in [(1, 1), (3, 7), (10, 2), (8, 8)]:
        ind = np.ones((m, n), dtype=np.uint8)
        ind[0, 0] = 1
        ds = _masked(rng.normal(size=(m, n)), ind)
        assert build_features(ds).width == m + n + 2


def test_train_targets_reconstruct_observed_matrix():
    rng = np.random.default_rng(10)
    truth = rng.normal(size=(5, 4))
    ind = (rng.random((5, 4)) < 0.7).astype(np.uint8)
    ind[0, 0] = 1
    ds = _masked(truth, ind)
    ft = build_features(ds)
    rebuilt = np.full((5, 4), np.nan)
    for row in ft.train_rows:
        i, j = ft.cell_index[row]
        rebuilt[i, j] = ft.targets[row]
    assert np.array_equal(
        np.nan_to_num(rebuilt, nan=-1.0), np.nan_to_num(ds.observed, nan=-1.0)
    )


def test_row_permutation_permutes_table_blocks():
    rng = np.random.default_rng(11)
    truth = rng.normal(size=(4, 3))
    ind = (rng.random((4, 3)) < 0.8).astype(np.uint8)
    ind[0, 0] = 1
    ds = _masked(truth, ind)
    perm = np.array([2, 0, 3, 1])
    ds_p = _masked(truth[perm], ind[perm])
    ft_p = build_features(ds_p)
    ref_feats, ref_targets, _ = _reference_table(ds_p)
    assert np.array_equal(
        np.nan_to_num(ft_p.features, nan=-9.0), np.nan_to_num(ref_feats, nan=-9.0)
    )
    assert np.array_equal(
        np.nan_to_num(ft_p.targets, nan=-9.0), np.nan_to_num(ref_targets, nan=-9.0)
    )


def test_ridge_zero_targets_give_zero_predictions():
    rng = np.random.default_rng(12)
    truth = np.zeros((6, 4))
    ind = np.ones((6, 4), dtype=np.uint8)
    ind[2, 1] = ind[4, 3] = 0
    ds = _masked(truth, ind)
    preds = ridge_on_features(build_features(ds), 1.0)
    assert np.allclose(preds, 0.0, atol=1e-12)


def test_ridge_infinite_penalty_shrinks_to_train_mean():
    rng = np.random.default_rng(13)
    truth = rng.normal(size=(7, 5))
    ind = np.ones((7, 5), dtype=np.uint8)
    ind[1, 2] = ind[3, 4] = ind[6, 0] = 0
    ds = _masked(truth, ind)
    ft = build_features(ds)
    train_mean = ft.targets[ft.train_rows].mean()
    preds = ridge_on_features(ft, 1e12)
    assert np.allclose(preds, train_mean, atol=1e-6)


def test_ridge_completes_rank_one_with_constant_row_factor():
    # completion of 1 * v^T is linear in the column context, so the ridge
    # consumer should nail the held-out cell
    rng = np.random.default_rng(14)
    v = rng.normal(size=8)
    truth = np.outer(np.ones(10), v)
    ind = np.ones((10, 8), dtype=np.uint8)
    ind[3, 5] = 0
    ds = _masked(truth, ind)
    preds = ridge_on_features(build_features(ds), 1e-8)
    assert preds.size == 1
    assert abs(preds[0] - v[5]) < 1e-3


def test_ridge_singular_at_zero_penalty_reports():
    rng = np.random.default_rng(15)
    truth = rng.normal(size=(4, 3))  # 11 train rows < 12 design columns
    ind = np.ones((4, 3), dtype=np.uint8)
    ind[1, 1] = 0
    ds = _masked(truth, ind)
    ft = build_features(ds)
    with pytest.raises(SingularSystemError):
        ridge_on_features(ft, 0.0)
    preds = ridge_on_features(ft, 1e-6)  # caller retry succeeds
    assert np.all(np.isfinite(preds))


def test_ridge_rejects_negative_penalty():
    ds = _masked([[1.0, 2.0]], [[1, 0]])
    with pytest.raises(ValueError):
        ridge_on_features(build_features(ds), -1.0)


def test_ridge_train_fit_dimensions():
    rng = np.random.default_rng(16)
    truth = rng.normal(size=(6, 6))
    ind = (rng.random((6, 6)) < 0.75).astype(np.uint8)
    ind[0, 0] = 1
    ds = _masked(truth, ind)
    ft = build_features(ds)
    test_pred, train_fit = _ridge_fit_predict(ft, 0.1)
    assert test_pred.shape == (ft.test_rows.size,)
    assert train_fit.shape == (ft.train_rows.size,)
