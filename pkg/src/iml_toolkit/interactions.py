"""Interaction strength: Friedman H-statistics and a derivative-ICE screen.

Partial dependence functions inside the H-statistics are evaluated at the
observed data points (a seeded subsample capped at 300 rows, the cost is
quadratic in rows) and mean-centered, so constant shifts of the predictor
cancel exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Grid, as_predictor, rng_from_seed
from .effects import derivative_ice, ice

MAX_H_ROWS = 300


@dataclass(frozen=True)
class InteractionResult:
    names: tuple[str, ...]
    h_squared: float
    denominator: float
    degenerate: bool = False


def _subsample(data: Dataset, seed: int) -> np.ndarray:
    if data.n <= MAX_H_ROWS:
        return data.features
    rows = rng_from_seed(seed).choice(data.n, size=MAX_H_ROWS, replace=False)
    return data.features[rows]


def _pd_at_points(pred, X: np.ndarray, fixed: tuple[int, ...]) -> np.ndarray:
    """Partial dependence over the sample, fixing `fixed` to each row's values.

    Returns the mean-centered vector of PD values, one per row of X.
    """
    n = X.shape[0]
    tiled = np.tile(X, (n, 1))  # block i: the whole sample with row i's values fixed
    for j in fixed:
        tiled[:, j] = np.repeat(X[:, j], n)
    out = pred.predict(tiled).reshape(n, n).mean(axis=1)
    return out - out.mean()


def h_pairwise(pred, data: Dataset, j: int, k: int,
               grid_size: int | None = None, seed: int = 0) -> InteractionResult:
    """Friedman H² between two features.

    Share of the joint partial dependence variance not explained by the
    sum of the two univariate partial dependence functions.
    """
    if j == k:
        raise ValueError("h_pairwise requires two distinct features")
    pred = as_predictor(pred)
    X = _subsample(data, seed)
    pd_jk = _pd_at_points(pred, X, (j, k))
    pd_j = _pd_at_points(pred, X, (j,))
    pd_k = _pd_at_points(pred, X, (k,))
    denom = float(np.sum(pd_jk**2))
    names = (data.feature_names[j], data.feature_names[k])
    if denom < 1e-12:
        return InteractionResult(names, 0.0, denom, degenerate=True)
    h2 = float(np.sum((pd_jk - pd_j - pd_k) ** 2) / denom)
    return InteractionResult(names, h2, denom)


def h_total(pred, data: Dataset, j: int,
            grid_size: int | None = None, seed: int = 0) -> InteractionResult:
    """H² between one feature and all remaining features jointly."""
    if data.p < 2:
        raise ValueError("h_total needs at least two features")
    pred = as_predictor(pred)
    X = _subsample(data, seed)
    f = pred.predict(X)
    f = f - f.mean()
    pd_j = _pd_at_points(pred, X, (j,))
    rest = tuple(i for i in range(data.p) if i != j)
    pd_rest = _pd_at_points(pred, X, rest)
    denom = float(np.sum(f**2))
    names = (data.feature_names[j],)
    if denom < 1e-12:
        return InteractionResult(names, 0.0, denom, degenerate=True)
    h2 = float(np.sum((f - pd_j - pd_rest) ** 2) / denom)
    return InteractionResult(names, h2, denom)


def dice_screen(pred, data: Dataset, feature_index: int, grid: Grid) -> np.ndarray:
    """Interaction screen: per-grid-point std of the derivative ICE curves."""
    if grid.feature_index != feature_index:
        raise ValueError("grid was built for a different feature")
    _, std = derivative_ice(ice(pred, data, grid))
    return std
