"""Two-layer ensembling: permutation averaging and an adaptive convex blend.

The permutation layer shuffles rows and columns, imputes, undoes the
shuffle, and averages. The blend layer runs two base methods and combines
them with the closed-form weight that minimizes squared error against the
observed entries; the weight is intentionally not clipped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import DataMatrix, Mask, MaskedDataset, SeedSpec
from .imputers import ImputationResult, Imputer, make_imputer

__all__ = [
    "EnsembleSpec",
    "adaptive_weight",
    "blend",
    "permutation_ensemble",
]


@dataclass(frozen=True)
class EnsembleSpec:
    """Names the two base methods and the permutation count."""

    base_a: str = "featurized-ridge"
    base_b: str = "soft-impute"
    n_perms: int = 4
    degenerate_tol: float = 1e-12

    def __post_init__(self):
        if self.n_perms < 1:
            raise ValueError(f"n_perms must be >= 1, got {self.n_perms}")
        if not self.degenerate_tol > 0:
            raise ValueError("degenerate_tol must be positive")


def _permute_dataset(
    ds: MaskedDataset, row_perm: np.ndarray, col_perm: np.ndarray
) -> MaskedDataset:
    truth = None
    if ds.truth is not None:
        truth = DataMatrix(ds.truth.values[row_perm][:, col_perm])
    return MaskedDataset(
        mask=Mask(ds.mask.indicator[row_perm][:, col_perm]),
        observed=ds.observed[row_perm][:, col_perm],
        truth=truth,
    )


def permutation_ensemble(
    imputer: Imputer,
    ds: MaskedDataset,
    n_perms: int,
    seed: SeedSpec,
    perms: Optional[Sequence[tuple[np.ndarray, np.ndarray]]] = None,
) -> ImputationResult:
    """Average the base imputer over row/column permutations of the input.

    ``perms`` pins explicit (row, column) permutation pairs, mainly for
    tests; otherwise each pair is drawn from its own derived stream.
    """
    if n_perms < 1:
        raise ValueError(f"n_perms must be >= 1, got {n_perms}")
    if perms is not None and len(perms) != n_perms:
        raise ValueError(f"expected {n_perms} permutation pairs, got {len(perms)}")
    m, n = ds.shape
    completed_sum = np.zeros((m, n))
    fitted_sum = np.zeros((m, n))
    have_fitted = True
    for t in range(n_perms):
        run_seed = seed.child(f"perm{t}")
        if perms is None:
            rng = run_seed.child("shuffle").rng()
            row_perm = rng.permutation(m)
            col_perm = rng.permutation(n)
        else:
            row_perm = np.asarray(perms[t][0])
            col_perm = np.asarray(perms[t][1])
        inv_rows = np.argsort(row_perm)
        inv_cols = np.argsort(col_perm)
        result = imputer.run(_permute_dataset(ds, row_perm, col_perm),
                             run_seed.child("impute"))
        completed_sum += result.completed.values[inv_rows][:, inv_cols]
        if result.fitted_observed is None:
            have_fitted = False
        else:
            fitted_sum += result.fitted_observed.values[inv_rows][:, inv_cols]
    completed = completed_sum / n_perms
    fitted = fitted_sum / n_perms if have_fitted else None
    diagnostics = {
        "method": "permutation-ensemble",
        "base": imputer.method,
        "n_perms": n_perms,
    }
    return ImputationResult(
        DataMatrix(np.where(ds.mask.observed, ds.observed, completed)),
        DataMatrix(fitted) if fitted is not None else None,
        diagnostics,
    )


def adaptive_weight(
    x1_hat: np.ndarray,
    x2_hat: np.ndarray,
    x_obs: np.ndarray,
    degenerate_tol: float = 1e-12,
) -> float:
    """Closed-form minimizer of ||x_obs - (w*x1 + (1-w)*x2)||^2 over w.

    Falls back to 0.5 when the two predictions coincide (denominator below
    the degeneracy tolerance). The result is not clipped to [0, 1].
    """
    x1 = np.asarray(x1_hat, dtype=float).ravel()
    x2 = np.asarray(x2_hat, dtype=float).ravel()
    xo = np.asarray(x_obs, dtype=float).ravel()
    if not (x1.size == x2.size == xo.size):
        raise ValueError(
            f"length mismatch: {x1.size}, {x2.size}, {xo.size}"
        )
    if x1.size == 0:
        raise ValueError("need at least one observed entry")
    diff = x1 - x2
    denom = float(diff @ diff)
    if denom < degenerate_tol:
        return 0.5
    return float((xo - x2) @ diff / denom)


def blend(ds: MaskedDataset, spec: EnsembleSpec, seed: SeedSpec) -> ImputationResult:
    """Adaptively weighted average of two permutation-ensembled methods."""
    base_a = make_imputer(spec.base_a)
    base_b = make_imputer(spec.base_b)
    res_a = permutation_ensemble(base_a, ds, spec.n_perms, seed.child("base-a"))
    res_b = permutation_ensemble(base_b, ds, spec.n_perms, seed.child("base-b"))
    if res_a.fitted_observed is None or res_b.fitted_observed is None:
        raise ValueError("both base methods must predict the observed cells")
    obs = ds.mask.observed
    w = adaptive_weight(
        res_a.fitted_observed.values[obs],
        res_b.fitted_observed.values[obs],
        ds.observed[obs],
        spec.degenerate_tol,
    )
    completed = w * res_a.completed.values + (1.0 - w) * res_b.completed.values
    fitted = w * res_a.fitted_observed.values + (1.0 - w) * res_b.fitted_observed.values
    diagnostics = {
        "method": "ensemble",
        "weight": w,
        "base_a": spec.base_a,
        "base_b": spec.base_b,
        "n_perms": spec.n_perms,
    }
    return ImputationResult(
        DataMatrix(np.where(obs, ds.observed, completed)),
        DataMatrix(fitted),
        diagnostics,
    )
