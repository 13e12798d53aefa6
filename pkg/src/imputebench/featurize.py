"""Entry-wise featurization: one regression row per cell of the matrix.

The row for cell (i, j) is the concatenation (i, j, row i of X, column j of
X), width m + n + 2, with NaN kept wherever the context is missing. Observed
cells form the training split and missing cells the test split, which turns
imputation into plain supervised regression. A closed-form ridge consumer is
provided as the desk-scale regressor for this table.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import MaskedDataset

__all__ = [
    "FeatureTable",
    "SingularSystemError",
    "build_features",
    "ridge_on_features",
]


class SingularSystemError(RuntimeError):
    """The normal equations are singular; retry with a positive ridge penalty."""


@dataclass(frozen=True)
class FeatureTable:
    """Per-cell regression view of a masked matrix.

    Rows are in row-major cell order: the row for cell (i, j) is i*n + j.
    ``features`` keeps the missing sentinel (NaN) wherever the row or column
    context is unobserved; ``targets`` holds the cell's own value, NaN when
    the cell itself is missing.
    """

    features: np.ndarray
    targets: np.ndarray
    cell_index: np.ndarray
    train_rows: np.ndarray
    test_rows: np.ndarray
    shape: tuple[int, int]

    @property
    def width(self) -> int:
        return self.features.shape[1]


def build_features(ds: MaskedDataset) -> FeatureTable:
    """Expand a masked matrix into its (m*n) x (m+n+2) feature table."""
    m, n = ds.shape
    x = ds.observed
    rows_i = np.repeat(np.arange(m), n)
    cols_j = np.tile(np.arange(n), m)
    features = np.concatenate(
        [
            rows_i[:, None].astype(float),
            cols_j[:, None].astype(float),
            np.repeat(x, n, axis=0),          # row context X[i, :]
            np.tile(x.T, (m, 1)),             # column context X[:, j]
        ],
        axis=1,
    )
    targets = x[rows_i, cols_j]
    observed_flat = ds.mask.observed[rows_i, cols_j]
    return FeatureTable(
        features=features,
        targets=targets,
        cell_index=np.column_stack([rows_i, cols_j]),
        train_rows=np.flatnonzero(observed_flat),
        test_rows=np.flatnonzero(~observed_flat),
        shape=(m, n),
    )


def _prepare_design(ft: FeatureTable) -> np.ndarray:
    """Make the table numeric: z-score the index pair on the training rows,
    mean-fill context sentinels, and append one missing indicator per
    context column."""
    index_cols = ft.features[:, :2].copy()
    context = ft.features[:, 2:]
    train = ft.train_rows

    mu = index_cols[train].mean(axis=0)
    sd = index_cols[train].std(axis=0)
    sd[sd == 0] = 1.0
    index_cols = (index_cols - mu) / sd

    indicators = np.isnan(context).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fill = np.nanmean(context[train], axis=0)
    fill = np.where(np.isnan(fill), 0.0, fill)
    filled = np.where(np.isnan(context), fill, context)

    return np.concatenate([index_cols, filled, indicators], axis=1)


def _ridge_fit_predict(
    ft: FeatureTable, ridge_lambda: float
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ridge on the training rows.

    Returns (predictions at test rows, fitted values at train rows). The
    intercept is handled by centering and left unpenalized.
    """
    if ridge_lambda < 0:
        raise ValueError(f"ridge penalty must be >= 0, got {ridge_lambda}")
    if ft.train_rows.size == 0:
        raise ValueError("no training rows: the dataset has no observed entry")
    design = _prepare_design(ft)
    a_train = design[ft.train_rows]
    y_train = ft.targets[ft.train_rows]

    col_mean = a_train.mean(axis=0)
    y_mean = y_train.mean()
    a_c = a_train - col_mean
    y_c = y_train - y_mean

    gram = a_c.T @ a_c
    if ridge_lambda > 0:
        gram = gram + ridge_lambda * np.eye(gram.shape[0])
    try:
        beta = np.linalg.solve(gram, a_c.T @ y_c)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "normal equations are singular at this penalty; retry with a "
            "larger ridge_lambda"
        ) from exc
    test_pred = (design[ft.test_rows] - col_mean) @ beta + y_mean
    train_fit = a_c @ beta + y_mean
    return test_pred, train_fit


def ridge_on_features(ft: FeatureTable, ridge_lambda: float) -> np.ndarray:
    """Predict the test-row (missing-cell) values with closed-form ridge."""
    test_pred, _ = _ridge_fit_predict(ft, ridge_lambda)
    return test_pred
