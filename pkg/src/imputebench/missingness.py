"""Mask generators: one MCAR, one MAR, and eleven MNAR mechanisms.

Every generator maps (complete matrix, parameters, seed) to a Mask and is a
pure function of those inputs. Mechanisms that target a missing rate
calibrate a sigmoid intercept by bisection so the expected rate matches.
The ``generate`` dispatcher resolves a PatternSpec, fills in the
per-pattern defaults for parameters the caller leaves out, and resamples a
fresh stream when a degenerate (fully missing) mask comes out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit, logit

from .core import DataMatrix, DegenerateMaskError, Mask, SeedSpec

__all__ = [
    "BanditConfig",
    "CalibrationError",
    "PatternSpec",
    "PATTERN_DEFAULTS",
    "PATTERN_TAGS",
    "calibrate_intercept",
    "gen_mcar",
    "gen_col_mar",
    "gen_nn_mnar",
    "gen_self_masking",
    "gen_censoring",
    "gen_panel",
    "gen_polarization_hard",
    "gen_polarization_soft",
    "gen_latent_factor",
    "gen_cluster",
    "gen_two_phase",
    "gen_block",
    "gen_seq",
    "generate",
]

MAX_RESAMPLE_ATTEMPTS = 16


class CalibrationError(RuntimeError):
    """The target mean propensity is unreachable within the intercept bracket."""


def calibrate_intercept(
    logits: np.ndarray,
    target_mean: float,
    tol: float = 1e-6,
    bracket: tuple[float, float] = (-30.0, 30.0),
) -> float:
    """Find b such that mean(sigmoid(logits + b)) hits the target.

    The mean propensity is continuous and strictly increasing in b, so plain
    bisection converges; the returned b satisfies |mean - target| <= tol.
    """
    if not 0.0 < target_mean < 1.0:
        raise ValueError(f"target mean must be in (0, 1), got {target_mean}")
    logits = np.asarray(logits, dtype=float).ravel()
    lo, hi = bracket

    def mean_at(b: float) -> float:
        return float(expit(logits + b).mean())

    if mean_at(lo) > target_mean + tol or mean_at(hi) < target_mean - tol:
        raise CalibrationError(
            f"target mean {target_mean} unreachable with intercept in {bracket}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = mean_at(mid)
        if abs(val - target_mean) <= tol:
            return mid
        if val < target_mean:
            lo = mid
        else:
            hi = mid
    raise CalibrationError("bisection failed to reach the requested tolerance")


def _zscore(x: np.ndarray) -> np.ndarray:
    """Population z-score; a zero-spread vector maps to all zeros."""
    centered = x - x.mean()
    std = centered.std()
    return centered / std if std > 0 else np.zeros_like(centered)


def _bernoulli_mask(p_observed: np.ndarray, rng: np.random.Generator) -> Mask:
    return Mask((rng.random(p_observed.shape) < p_observed).astype(np.uint8))


def _quantile(sorted_values: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile of an already sorted vector."""
    n = sorted_values.size
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return float(sorted_values[lo] * (1 - frac) + sorted_values[hi] * frac)


# ---------------------------------------------------------------------------
# MCAR
# ---------------------------------------------------------------------------


def gen_mcar(truth: DataMatrix, p_missing: float = 0.4, *, seed: SeedSpec) -> Mask:
    """Each entry missing independently with the same probability."""
    if not 0.0 <= p_missing < 1.0:
        raise ValueError(f"p_missing must be in [0, 1), got {p_missing}")
    rng = seed.rng()
    p_obs = np.full(truth.shape, 1.0 - p_missing)
    return _bernoulli_mask(p_obs, rng)


# ---------------------------------------------------------------------------
# Col-MAR
# ---------------------------------------------------------------------------


def _col_mar_design(values: np.ndarray, p_missing: float, predictor_fraction: float,
                    rng: np.random.Generator):
    """Draw predictor columns and per-column logistic models.

    Returns (predictor column indices, masked column indices, weight list,
    intercept list, missing-propensity matrix for the masked columns).
    """
    m, n = values.shape
    n_pred = math.ceil(predictor_fraction * n)
    if n - n_pred < 1:
        raise ValueError(
            f"predictor_fraction {predictor_fraction} leaves no column to mask"
        )
    predictors = np.sort(rng.choice(n, size=n_pred, replace=False))
    masked_cols = np.setdiff1d(np.arange(n), predictors)
    x_pred = values[:, predictors]
    weights, intercepts, p_miss = [], [], np.empty((m, masked_cols.size))
    for idx, _ in enumerate(masked_cols):
        w = rng.normal(size=n_pred)
        score = _zscore(x_pred @ w)
        b = calibrate_intercept(score, p_missing)
        weights.append(w)
        intercepts.append(b)
        p_miss[:, idx] = expit(score + b)
    return predictors, masked_cols, weights, intercepts, p_miss


def gen_col_mar(
    truth: DataMatrix,
    p_missing: float = 0.4,
    predictor_fraction: float = 0.05,
    *,
    seed: SeedSpec,
) -> Mask:
    """Fully observed predictor columns drive logistic masking of the rest.

    Each masked column's missing propensity is a sigmoid of a random linear
    combination of the predictor values, with the intercept calibrated so the
    column's expected missing fraction equals ``p_missing``.
    """
    if truth.cols < 2:
        raise ValueError("need at least 2 columns")
    if not 0.0 < p_missing < 1.0:
        raise ValueError(f"p_missing must be in (0, 1), got {p_missing}")
    if not 0.0 < predictor_fraction < 1.0:
        raise ValueError(
            f"predictor_fraction must be in (0, 1), got {predictor_fraction}"
        )
    rng = seed.rng()
    _, masked_cols, _, _, p_miss = _col_mar_design(
        truth.values, p_missing, predictor_fraction, rng
    )
    indicator = np.ones(truth.shape, dtype=np.uint8)
    u = rng.random((truth.rows, masked_cols.size))
    indicator[:, masked_cols] = (u >= p_miss).astype(np.uint8)
    return Mask(indicator)


# ---------------------------------------------------------------------------
# NN-MNAR
# ---------------------------------------------------------------------------


def _nn_forward(inputs: np.ndarray, layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Feed-forward pass: tanh hidden activations, raw final logits."""
    h = inputs
    for depth, (w, b) in enumerate(layers):
        h = h @ w + b
        if depth < len(layers) - 1:
            h = np.tanh(h)
    return h.ravel()


def _nn_mnar_design(values: np.ndarray, p_missing: float,
                    neighborhood_size_range: tuple[int, int],
                    layer_range: tuple[int, int],
                    width_range: tuple[int, int],
                    rng: np.random.Generator):
    """Draw the network, per-cell neighborhoods, and calibrated propensities.

    Returns (observed-propensity matrix, neighborhoods (m*n, s, 2), layers).
    """
    m, n = values.shape
    s_lo, s_hi = neighborhood_size_range
    size = int(rng.integers(s_lo, s_hi + 1))
    size = max(1, min(size, m + n - 1))
    n_hidden = int(rng.integers(layer_range[0], layer_range[1] + 1))
    width = int(rng.integers(width_range[0], width_range[1] + 1))

    dims = [size] + [width] * n_hidden + [1]
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        layers.append((rng.normal(size=(d_in, d_out)), rng.normal(size=d_out)))

    # Candidate c < n is cell (i, c) in the row; c >= n is a cell in the
    # column, skipping row i so (i, j) is listed once.
    neighborhoods = np.empty((m * n, size, 2), dtype=np.intp)
    for i in range(m):
        for j in range(n):
            chosen = rng.choice(m + n - 1, size=size, replace=False)
            cell = i * n + j
            for t, c in enumerate(chosen):
                if c < n:
                    neighborhoods[cell, t] = (i, c)
                else:
                    r = c - n
                    neighborhoods[cell, t] = (r if r < i else r + 1, j)

    inputs = values[neighborhoods[:, :, 0], neighborhoods[:, :, 1]]
    logits = _nn_forward(inputs, layers)
    shift = calibrate_intercept(logits, 1.0 - p_missing)
    p_obs = expit(logits + shift).reshape(m, n)
    return p_obs, neighborhoods, layers


def gen_nn_mnar(
    truth: DataMatrix,
    p_missing: float = 0.4,
    neighborhood_size_range: tuple[int, int] = (3, 8),
    layer_range: tuple[int, int] = (1, 3),
    width_range: tuple[int, int] = (4, 16),
    *,
    seed: SeedSpec,
) -> Mask:
    """Propensity of each cell is a random network applied to a random
    neighborhood of its row and column, globally calibrated to the target
    missing rate."""
    if not 0.0 < p_missing < 1.0:
        raise ValueError(f"p_missing must be in (0, 1), got {p_missing}")
    for name, rng_pair in (
        ("neighborhood_size_range", neighborhood_size_range),
        ("layer_range", layer_range),
        ("width_range", width_range),
    ):
        lo, hi = rng_pair
        if lo > hi or lo < 1:
            raise ValueError(f"{name} must be a nonempty positive range, got {rng_pair}")
    rng = seed.rng()
    p_obs, _, _ = _nn_mnar_design(
        truth.values, p_missing, neighborhood_size_range, layer_range, width_range, rng
    )
    return _bernoulli_mask(p_obs, rng)


# ---------------------------------------------------------------------------
# Self-masking
# ---------------------------------------------------------------------------

SELF_MASKING_COEFFS = (-2.0, -1.0, 1.0, 2.0)


def _self_masking_design(values: np.ndarray, p_missing: float,
                         target_cols: np.ndarray, rng: np.random.Generator):
    """Returns (slopes, intercepts, missing-propensity matrix for targets)."""
    alphas = rng.choice(SELF_MASKING_COEFFS, size=target_cols.size)
    intercepts = np.empty(target_cols.size)
    p_miss = np.empty((values.shape[0], target_cols.size))
    for idx, j in enumerate(target_cols):
        logits = alphas[idx] * values[:, j]
        intercepts[idx] = calibrate_intercept(logits, p_missing)
        p_miss[:, idx] = expit(logits + intercepts[idx])
    return alphas, intercepts, p_miss


def gen_self_masking(
    truth: DataMatrix,
    p_missing: float = 0.4,
    target_cols: Optional[Sequence[int]] = None,
    *,
    seed: SeedSpec,
) -> Mask:
    """Missingness of a cell is a logistic function of its own value.

    Slopes come from a fixed four-element coefficient set; each target
    column's intercept is calibrated to the target missing rate. Columns not
    targeted stay fully observed (default: every column is a target).
    """
    if not 0.0 < p_missing < 1.0:
        raise ValueError(f"p_missing must be in (0, 1), got {p_missing}")
    if target_cols is None:
        targets = np.arange(truth.cols)
    else:
        targets = np.unique(np.asarray(target_cols, dtype=int))
        if targets.size == 0:
            raise ValueError("target_cols must not be empty")
        if targets.min() < 0 or targets.max() >= truth.cols:
            raise ValueError(f"target_cols out of range for {truth.cols} columns")
    rng = seed.rng()
    _, _, p_miss = _self_masking_design(truth.values, p_missing, targets, rng)
    indicator = np.ones(truth.shape, dtype=np.uint8)
    u = rng.random((truth.rows, targets.size))
    indicator[:, targets] = (u >= p_miss).astype(np.uint8)
    return Mask(indicator)


# ---------------------------------------------------------------------------
# Censoring
# ---------------------------------------------------------------------------


def gen_censoring(
    truth: DataMatrix,
    q_censor: float = 0.25,
    *,
    seed: SeedSpec,
    directions: Optional[Sequence[str]] = None,
) -> Mask:
    """Detection-limit masking: per column, hide one tail beyond a quantile.

    Direction is drawn left/right with equal probability per column unless
    ``directions`` pins it; given directions the mask is deterministic.
    Comparisons are strict, so threshold ties stay observed.
    """
    if not 0.0 <= q_censor < 0.5:
        raise ValueError(f"q_censor must be in [0, 0.5), got {q_censor}")
    values = truth.values
    if directions is None:
        rng = seed.rng()
        dirs = np.where(rng.random(truth.cols) < 0.5, "left", "right")
    else:
        dirs = np.asarray(directions)
        if dirs.size != truth.cols or not np.isin(dirs, ("left", "right")).all():
            raise ValueError("directions must give 'left' or 'right' per column")
    indicator = np.ones(truth.shape, dtype=np.uint8)
    for j in range(truth.cols):
        col = np.sort(values[:, j])
        if dirs[j] == "left":
            threshold = _quantile(col, q_censor)
            hidden = values[:, j] < threshold
        else:
            threshold = _quantile(col, 1.0 - q_censor)
            hidden = values[:, j] > threshold
        indicator[hidden, j] = 0
    return Mask(indicator)


# ---------------------------------------------------------------------------
# Panel dropout
# ---------------------------------------------------------------------------


def gen_panel(truth: DataMatrix, *, seed: SeedSpec) -> Mask:
    """Each row drops out at a uniform time; everything after is missing."""
    if truth.cols < 2:
        raise ValueError("panel dropout needs at least 2 columns")
    rng = seed.rng()
    t0 = rng.integers(1, truth.cols, size=truth.rows)
    cols = np.arange(truth.cols)
    indicator = (cols[None, :] < t0[:, None]).astype(np.uint8)
    return Mask(indicator)


# ---------------------------------------------------------------------------
# Polarization
# ---------------------------------------------------------------------------


def gen_polarization_hard(
    truth: DataMatrix, q_thresh: float = 0.25, *, seed: SeedSpec
) -> Mask:
    """Deterministically hide the middle of each column's distribution.

    Entries strictly between the q and 1-q quantiles are masked; the seed is
    accepted for interface uniformity but never consumed.
    """
    if not 0.0 < q_thresh < 0.5:
        raise ValueError(f"q_thresh must be in (0, 0.5), got {q_thresh}")
    values = truth.values
    indicator = np.ones(truth.shape, dtype=np.uint8)
    for j in range(truth.cols):
        col = np.sort(values[:, j])
        low = _quantile(col, q_thresh)
        high = _quantile(col, 1.0 - q_thresh)
        hidden = (values[:, j] > low) & (values[:, j] < high)
        indicator[hidden, j] = 0
    return Mask(indicator)


def _soft_polarization_propensity(
    values: np.ndarray, alpha: float, eps: float
) -> np.ndarray:
    """Missing propensity grows with normalized distance from the column median."""
    p_miss = np.empty_like(values)
    for j in range(values.shape[1]):
        col = values[:, j]
        dist = np.abs(col - np.median(col)) ** alpha
        top = dist.max()
        ratio = dist / top if top > 0 else np.zeros_like(dist)
        # convex-combination form keeps the endpoints float-exact:
        # ratio 0 -> eps, ratio 1 -> 1 - eps
        p_miss[:, j] = eps * (1.0 - ratio) + (1.0 - eps) * ratio
    return p_miss


def gen_polarization_soft(
    truth: DataMatrix,
    alpha: float = 2.5,
    eps: float = 0.05,
    *,
    seed: SeedSpec,
) -> Mask:
    """Probabilistic polarization: extremes are the most likely to go missing.

    The propensity is exactly eps at the column median and exactly 1-eps at
    the maximum distance from it; a zero-spread column stays at eps.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must be in (0, 0.5), got {eps}")
    rng = seed.rng()
    p_miss = _soft_polarization_propensity(truth.values, alpha, eps)
    return _bernoulli_mask(1.0 - p_miss, rng)


# ---------------------------------------------------------------------------
# Latent-factor missingness
# ---------------------------------------------------------------------------


def _latent_factor_design(shape: tuple[int, int], k_low: int, k_high: int,
                          rng: np.random.Generator):
    m, n = shape
    k = int(rng.integers(k_low, k_high + 1))
    u = rng.normal(size=(m, k))
    v = rng.normal(size=(n, k))
    b = rng.normal(size=m)
    c = rng.normal(size=n)
    p_obs = expit(u @ v.T + b[:, None] + c[None, :])
    return k, p_obs


def gen_latent_factor(
    truth: DataMatrix, k_low: int = 1, k_high: int = 5, *, seed: SeedSpec
) -> Mask:
    """Observation propensity from a low-rank bilinear model with biases."""
    if not 1 <= k_low <= k_high:
        raise ValueError(f"need 1 <= k_low <= k_high, got ({k_low}, {k_high})")
    rng = seed.rng()
    _, p_obs = _latent_factor_design(truth.shape, k_low, k_high, rng)
    return _bernoulli_mask(p_obs, rng)


# ---------------------------------------------------------------------------
# Cluster missingness
# ---------------------------------------------------------------------------


def _cluster_design(shape: tuple[int, int], n_row_clusters: int, n_col_clusters: int,
                    tau_r: float, tau_c: float, eps_std: float,
                    rng: np.random.Generator):
    m, n = shape
    row_assign = rng.integers(0, n_row_clusters, size=m)
    col_assign = rng.integers(0, n_col_clusters, size=n)
    row_effect = rng.normal(0.0, tau_r, size=n_row_clusters)
    col_effect = rng.normal(0.0, tau_c, size=n_col_clusters)
    noise = rng.normal(0.0, eps_std, size=(m, n)) if eps_std > 0 else np.zeros((m, n))
    p_obs = expit(row_effect[row_assign][:, None] + col_effect[col_assign][None, :] + noise)
    return row_assign, col_assign, p_obs


def gen_cluster(
    truth: DataMatrix,
    n_row_clusters: int = 5,
    n_col_clusters: int = 4,
    tau_r: float = 1.0,
    tau_c: float = 1.0,
    eps_std: float = 1.0,
    *,
    seed: SeedSpec,
) -> Mask:
    """Additive random effects of row and column clusters set the propensity."""
    if n_row_clusters < 1 or n_col_clusters < 1:
        raise ValueError("cluster counts must be >= 1")
    if min(tau_r, tau_c, eps_std) < 0:
        raise ValueError("effect scales must be >= 0")
    rng = seed.rng()
    _, _, p_obs = _cluster_design(
        truth.shape, n_row_clusters, n_col_clusters, tau_r, tau_c, eps_std, rng
    )
    return _bernoulli_mask(p_obs, rng)


# ---------------------------------------------------------------------------
# Two-phase collection
# ---------------------------------------------------------------------------


def _two_phase_design(values: np.ndarray, f_cheap: float, alpha: float, beta: float,
                      rng: np.random.Generator):
    """Returns (cheap columns, expensive columns, per-row keep probability)."""
    m, n = values.shape
    n_cheap = max(1, round(f_cheap * n))
    if n_cheap >= n:
        raise ValueError(
            f"f_cheap {f_cheap} leaves no expensive column on {n} columns"
        )
    cheap = np.sort(rng.choice(n, size=n_cheap, replace=False))
    expensive = np.setdiff1d(np.arange(n), cheap)
    w = rng.normal(size=n_cheap)
    score = _zscore(values[:, cheap] @ w)
    p_keep = expit(alpha + beta * score)
    return cheap, expensive, p_keep


def gen_two_phase(
    truth: DataMatrix,
    f_cheap: float = 0.4,
    alpha: float = 0.0,
    beta: float = 2.0,
    *,
    seed: SeedSpec,
) -> Mask:
    """Cheap columns are always collected; a logistic score of them decides,
    row by row, whether the whole expensive block is collected."""
    if not 0.0 < f_cheap < 1.0:
        raise ValueError(f"f_cheap must be in (0, 1), got {f_cheap}")
    if truth.cols < 2:
        raise ValueError("two-phase needs at least 2 columns")
    rng = seed.rng()
    _, expensive, p_keep = _two_phase_design(truth.values, f_cheap, alpha, beta, rng)
    keep = rng.random(truth.rows) < p_keep
    indicator = np.ones(truth.shape, dtype=np.uint8)
    indicator[np.ix_(~keep, expensive)] = 0
    return Mask(indicator)


# ---------------------------------------------------------------------------
# Block missingness
# ---------------------------------------------------------------------------


def _block_design(values: np.ndarray, p_missing: float, n_row_blocks: int,
                  n_col_blocks: int, rng: np.random.Generator):
    """Returns (row block ids, col block ids, per-block missing propensity)."""
    m, n = values.shape
    row_ids = np.repeat(np.arange(n_row_blocks), [len(c) for c in np.array_split(range(m), n_row_blocks)])
    col_ids = np.repeat(np.arange(n_col_blocks), [len(c) for c in np.array_split(range(n), n_col_blocks)])
    scores = np.zeros((n_row_blocks, n_col_blocks))
    for br in range(n_row_blocks):
        for bc in range(n_col_blocks):
            scores[br, bc] = values[np.ix_(row_ids == br, col_ids == bc)].mean()
    scores = _zscore(scores.ravel()).reshape(scores.shape)
    cell_logits = scores[row_ids[:, None], col_ids[None, :]]
    b = calibrate_intercept(cell_logits, p_missing)
    p_miss = expit(scores + b)
    return row_ids, col_ids, p_miss


def gen_block(
    truth: DataMatrix,
    p_missing: float = 0.4,
    n_row_blocks: int = 10,
    n_col_blocks: int = 10,
    conv: str = "mean",
    *,
    seed: SeedSpec,
) -> Mask:
    """Whole contiguous blocks go missing together.

    The matrix is tiled into a block grid; each block's mean value is
    z-scored into a logit and the shared intercept is calibrated so the
    expected overall missing fraction equals ``p_missing``. One Bernoulli
    draw per block paints it missing or observed.
    """
    if not 0.0 < p_missing < 1.0:
        raise ValueError(f"p_missing must be in (0, 1), got {p_missing}")
    if conv != "mean":
        raise ValueError(f"unsupported convolution type {conv!r}")
    if n_row_blocks < 1 or n_col_blocks < 1:
        raise ValueError("block counts must be >= 1")
    if n_row_blocks > truth.rows or n_col_blocks > truth.cols:
        raise ValueError(
            f"block grid {n_row_blocks}x{n_col_blocks} exceeds matrix {truth.shape}"
        )
    rng = seed.rng()
    row_ids, col_ids, p_miss = _block_design(
        truth.values, p_missing, n_row_blocks, n_col_blocks, rng
    )
    u = rng.random(p_miss.shape)
    block_missing = u < p_miss
    indicator = (~block_missing[row_ids[:, None], col_ids[None, :]]).astype(np.uint8)
    return Mask(indicator)


# ---------------------------------------------------------------------------
# Sequential (bandit) missingness
# ---------------------------------------------------------------------------

BANDIT_ALGORITHMS = ("epsilon_greedy", "ucb", "thompson", "gradient_bandit")


@dataclass(frozen=True)
class BanditConfig:
    """Configuration of the per-row bandit that writes the mask."""

    algorithm: str = "epsilon_greedy"
    epsilon: float = 0.4
    epsilon_decay: float = 0.99
    pooling: bool = False
    reward_noise_scale: float = 1.0

    def __post_init__(self):
        if self.algorithm not in BANDIT_ALGORITHMS:
            raise ValueError(
                f"unknown bandit algorithm {self.algorithm!r}; "
                f"choose from {BANDIT_ALGORITHMS}"
            )
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError(
                f"epsilon_decay must be in (0, 1], got {self.epsilon_decay}"
            )
        if self.reward_noise_scale < 0:
            raise ValueError("reward_noise_scale must be >= 0")


GRADIENT_BANDIT_STEP = 0.1


def gen_seq(
    truth: DataMatrix,
    cfg: BanditConfig = BanditConfig(),
    p_missing: float = 0.4,
    *,
    seed: SeedSpec,
) -> Mask:
    """Columns are time steps; each row is an agent picking arm 0 (skip) or
    arm 1 (observe).

    Arm 0 pays the matrix value itself and arm 1 pays it plus exogenous
    Gaussian noise. The first two columns force one play of each arm
    (agent i starts with arm 1 when i is even); afterwards the configured
    algorithm chooses from per-agent statistics, or pooled statistics when
    ``cfg.pooling`` is set. Epsilon-greedy exploration picks the skip arm
    with probability ``p_missing``. Argmax ties always go to arm 1.

    Randomness is consumed on a fixed schedule (noise matrix up front, then
    per column: one uniform vector per decision plus one per exploration or
    preference sample), so a straight-line reimplementation with the same
    seed reproduces the arm sequence exactly.
    """
    if truth.cols < 2:
        raise ValueError("sequential masking needs at least 2 columns")
    if not 0.0 <= p_missing <= 1.0:
        raise ValueError(f"p_missing must be in [0, 1], got {p_missing}")
    m, n = truth.shape
    rng = seed.rng()
    noise = rng.normal(0.0, cfg.reward_noise_scale, size=(m, n)) \
        if cfg.reward_noise_scale > 0 else np.zeros((m, n))
    rewards = np.stack([truth.values, truth.values + noise], axis=-1)  # (m, n, 2)

    n_units = 1 if cfg.pooling else m
    counts = np.zeros((n_units, 2))
    sums = np.zeros((n_units, 2))
    prefs = np.zeros((n_units, 2))
    baseline_sum = np.zeros(n_units)
    baseline_cnt = np.zeros(n_units)
    unit = np.zeros(m, dtype=np.intp) if cfg.pooling else np.arange(m)

    indicator = np.zeros((m, n), dtype=np.uint8)
    agents = np.arange(m)
    for j in range(n):
        if j == 0:
            arms = ((agents + 1) % 2).astype(np.intp)
        elif j == 1:
            arms = (agents % 2).astype(np.intp)
        elif cfg.algorithm == "epsilon_greedy":
            eps_j = cfg.epsilon * cfg.epsilon_decay ** (j - 2)
            u_explore = rng.random(m)
            u_arm = rng.random(m)
            means = _bandit_means(sums, counts)[unit]
            greedy = (means[:, 1] >= means[:, 0]).astype(np.intp)
            explored = np.where(u_arm < p_missing, 0, 1)
            arms = np.where(u_explore < eps_j, explored, greedy).astype(np.intp)
        elif cfg.algorithm == "ucb":
            means = _bandit_means(sums, counts)[unit]
            total = counts.sum(axis=1)[unit]
            bonus = np.sqrt(2.0 * np.log(np.maximum(total, 1.0))[:, None]
                            / np.maximum(counts[unit], 1.0))
            ucb = means + bonus
            arms = (ucb[:, 1] >= ucb[:, 0]).astype(np.intp)
        elif cfg.algorithm == "thompson":
            z = rng.standard_normal((m, 2))
            post_mean = sums[unit] / (counts[unit] + 1.0)
            post_sd = 1.0 / np.sqrt(counts[unit] + 1.0)
            draw = post_mean + post_sd * z
            arms = (draw[:, 1] >= draw[:, 0]).astype(np.intp)
        else:  # gradient_bandit
            u = rng.random(m)
            shifted = prefs[unit] - prefs[unit].max(axis=1, keepdims=True)
            e = np.exp(shifted)
            pi1 = e[:, 1] / e.sum(axis=1)
            arms = (u < pi1).astype(np.intp)

        got = rewards[agents, j, arms]
        indicator[:, j] = arms
        if cfg.algorithm == "gradient_bandit":
            shifted = prefs[unit] - prefs[unit].max(axis=1, keepdims=True)
            e = np.exp(shifted)
            pi = e / e.sum(axis=1, keepdims=True)
            base = np.where(baseline_cnt[unit] > 0,
                            baseline_sum[unit] / np.maximum(baseline_cnt[unit], 1.0),
                            0.0)
            adv = GRADIENT_BANDIT_STEP * (got - base)
            onehot = np.zeros((m, 2))
            onehot[agents, arms] = 1.0
            update = adv[:, None] * (onehot - pi)
            if cfg.pooling:
                prefs[0] += update.sum(axis=0)
            else:
                prefs += update
        if cfg.pooling:
            np.add.at(sums[0], arms, got)
            np.add.at(counts[0], arms, 1.0)
            baseline_sum[0] += got.sum()
            baseline_cnt[0] += m
        else:
            sums[agents, arms] += got
            counts[agents, arms] += 1.0
            baseline_sum += got
            baseline_cnt += 1.0
    return Mask(indicator)


def _bandit_means(sums: np.ndarray, counts: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1.0), 0.0)
    return means


# ---------------------------------------------------------------------------
# Dispatcher
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternSpec:
    """Names one mechanism plus its parameter overrides and seed."""

    pattern: str
    seed: SeedSpec
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.pattern not in PATTERN_DEFAULTS:
            known = ", ".join(PATTERN_TAGS)
            raise ValueError(f"unknown pattern {self.pattern!r} (choose from: {known})")
        unknown = set(self.params) - set(PATTERN_DEFAULTS[self.pattern])
        if unknown:
            raise ValueError(
                f"unknown parameters for {self.pattern!r}: {sorted(unknown)}"
            )
        object.__setattr__(self, "params", dict(self.params))

    def resolved_params(self) -> dict:
        merged = dict(PATTERN_DEFAULTS[self.pattern])
        merged.update(self.params)
        return merged


PATTERN_DEFAULTS: dict[str, dict] = {
    "mcar": {"p_missing": 0.4},
    "col-mar": {"p_missing": 0.4, "predictor_fraction": 0.05},
    "nn-mnar": {
        "p_missing": 0.4,
        "neighborhood_size_range": (3, 8),
        "layer_range": (1, 3),
        "width_range": (4, 16),
    },
    "self-masking": {"p_missing": 0.4, "target_cols": None},
    "censoring": {"q_censor": 0.25},
    "panel": {},
    "polarization-hard": {"q_thresh": 0.25},
    "polarization-soft": {"alpha": 2.5, "eps": 0.05},
    "latent-factor": {"k_low": 1, "k_high": 5},
    "cluster": {
        "n_row_clusters": 5,
        "n_col_clusters": 4,
        "tau_r": 1.0,
        "tau_c": 1.0,
        "eps_std": 1.0,
    },
    "two-phase": {"f_cheap": 0.4, "alpha": 0.0, "beta": 2.0},
    "block": {
        "p_missing": 0.4,
        "n_row_blocks": 10,
        "n_col_blocks": 10,
        "conv": "mean",
    },
    "seq": {
        "algorithm": "epsilon_greedy",
        "epsilon": 0.4,
        "epsilon_decay": 0.99,
        "pooling": False,
        "reward_noise_scale": 1.0,
        "p_missing": 0.4,
    },
}

PATTERN_TAGS = tuple(PATTERN_DEFAULTS)


def _dispatch(pattern: str, truth: DataMatrix, params: dict, seed: SeedSpec) -> Mask:
    if pattern == "seq":
        cfg = BanditConfig(
            algorithm=params["algorithm"],
            epsilon=params["epsilon"],
            epsilon_decay=params["epsilon_decay"],
            pooling=params["pooling"],
            reward_noise_scale=params["reward_noise_scale"],
        )
        return gen_seq(truth, cfg, params["p_missing"], seed=seed)
    generators = {
        "mcar": gen_mcar,
        "col-mar": gen_col_mar,
        "nn-mnar": gen_nn_mnar,
        "self-masking": gen_self_masking,
        "censoring": gen_censoring,
        "panel": gen_panel,
        "polarization-hard": gen_polarization_hard,
        "polarization-soft": gen_polarization_soft,
        "latent-factor": gen_latent_factor,
        "cluster": gen_cluster,
        "two-phase": gen_two_phase,
        "block": gen_block,
    }
    return generators[pattern](truth, **params, seed=seed)


def generate(spec: PatternSpec, truth: DataMatrix) -> Mask:
    """Run the named generator, resampling degenerate fully-missing masks.

    Up to 16 attempts are made, each on a freshly derived stream; identical
    spec and seed always reproduce the same mask.
    """
    params = spec.resolved_params()
    for attempt in range(MAX_RESAMPLE_ATTEMPTS):
        seed = spec.seed if attempt == 0 else spec.seed.child(f"retry{attempt}")
        mask = _dispatch(spec.pattern, truth, params, seed)
        if mask.n_observed > 0:
            return mask
    raise DegenerateMaskError(
        f"pattern {spec.pattern!r} produced fully-missing masks in "
        f"{MAX_RESAMPLE_ATTEMPTS} attempts"
    )
