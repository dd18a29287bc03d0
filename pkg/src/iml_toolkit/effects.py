"""Feature-effect estimators: ICE, PDP, ALE and the conditional M-plot.

All estimators are Monte Carlo averages over the supplied data and never
query the model for gradients; derivative curves use finite differences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .core import Dataset, DegenerateFeatureError, Grid, as_predictor


@dataclass(frozen=True)
class EffectCurve:
    """One-dimensional effect estimate on a grid.

    `values` is the aggregate curve; ICE variants additionally carry the
    per-observation matrix (n rows by grid length).
    """

    grid: Grid
    values: np.ndarray
    kind: str
    per_observation: np.ndarray | None = None
    centered: bool = False

    def __post_init__(self):
        if len(self.values) != len(self.grid):
            raise ValueError("values length must equal grid length")
        if self.per_observation is not None and self.per_observation.shape[1] != len(
            self.grid
        ):
            raise ValueError("per_observation width must equal grid length")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.per_observation is None:
                writer.writerow(["grid", "value"])
                for g, v in zip(self.grid.values, self.values):
                    writer.writerow([repr(float(g)), repr(float(v))])
            else:
                writer.writerow(["grid", "value", "row_id"])
                for i, row in enumerate(self.per_observation):
                    for g, v in zip(self.grid.values, row):
                        writer.writerow([repr(float(g)), repr(float(v)), i])


@dataclass(frozen=True)
class Effect2D:
    grid_a: Grid
    grid_b: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.grid_a), len(self.grid_b)):
            raise ValueError("surface shape must match grid lengths")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["a", "b", "value"])
            for ia, a in enumerate(self.grid_a.values):
                for ib, b in enumerate(self.grid_b.values):
                    writer.writerow(
                        [repr(float(a)), repr(float(b)), repr(float(self.values[ia, ib]))]
                    )


def ice(pred, data: Dataset, grid: Grid) -> EffectCurve:
    """Individual conditional expectation curves, one per observation.

    Predictions for all (row, grid value) combinations are batched into a
    single model call.
    """
    pred = as_predictor(pred)
    n, g = data.n, len(grid)
    tiled = np.repeat(data.features, g, axis=0)
    tiled[:, grid.feature_index] = np.tile(grid.values, n)
    curves = pred.predict(tiled).reshape(n, g)
    return EffectCurve(grid, curves.mean(axis=0), "ice", per_observation=curves)


def pdp(pred, data: Dataset, grid: Grid) -> EffectCurve:
    """Partial dependence: the pointwise mean of the ICE curves."""
    curve = ice(pred, data, grid)
    return EffectCurve(grid, curve.values, "pdp")


def centered_ice(curve: EffectCurve, anchor: int = 0) -> EffectCurve:
    """Shift each ICE curve so its value at the anchor grid position is zero."""
    if curve.kind != "ice":
        raise ValueError("centered_ice expects a raw ICE curve")
    if not 0 <= anchor < len(curve.grid):
        raise ValueError("anchor grid position out of range")
    shifted = curve.per_observation - curve.per_observation[:, [anchor]]
    return EffectCurve(
        curve.grid, shifted.mean(axis=0), "centered_ice",
        per_observation=shifted, centered=True,
    )


def derivative_ice(curve: EffectCurve) -> tuple[EffectCurve, np.ndarray]:
    """Per-row finite-difference slopes and their per-grid-point spread.

    Central differences inside the grid, one-sided at the endpoints. The
    returned std vector is the interaction screen of the derivative plot.
    """
    if curve.kind != "ice":
        raise ValueError("derivative_ice expects a raw ICE curve")
    if len(curve.grid) < 2:
        raise ValueError("grid too short for finite differences")
    deriv = np.gradient(curve.per_observation, curve.grid.values, axis=1)
    std = deriv.std(axis=0)
    out = EffectCurve(curve.grid, deriv.mean(axis=0), "derivative_ice", per_observation=deriv)
    return out, std


def pdp_2d(pred, data: Dataset, grid_a: Grid, grid_b: Grid) -> Effect2D:
    """Two-dimensional partial dependence surface for a feature pair."""
    if grid_a.feature_index == grid_b.feature_index:
        raise ValueError("2-D PDP requires two distinct features")
    pred = as_predictor(pred)
    ga, gb = len(grid_a), len(grid_b)
    pairs = np.stack(
        [np.repeat(grid_a.values, gb), np.tile(grid_b.values, ga)], axis=1
    )
    tiled = np.repeat(data.features, ga * gb, axis=0)
    tiled[:, grid_a.feature_index] = np.tile(pairs[:, 0], data.n)
    tiled[:, grid_b.feature_index] = np.tile(pairs[:, 1], data.n)
    values = pred.predict(tiled).reshape(data.n, ga, gb).mean(axis=0)
    return Effect2D(grid_a, grid_b, values)


def ale(pred, data: Dataset, feature_index: int, n_intervals: int = 20) -> EffectCurve:
    """First-order accumulated local effects on a quantile partition.

    Within each interval the prediction difference between the interval
    edges is averaged over the observations falling inside; differences
    are accumulated and the curve centered to zero data-weighted mean.
    """
    if n_intervals < 1:
        raise ValueError("need at least one interval")
    pred = as_predictor(pred)
    x = data.features[:, feature_index]
    if x.min() == x.max():
        raise DegenerateFeatureError("degenerate feature: constant column")
    qs = np.quantile(x, np.linspace(0.0, 1.0, n_intervals + 1), method="linear")
    edges = np.unique(qs)  # merges empty / duplicated quantile intervals
    k = len(edges) - 1
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, k - 1)

    lower = data.features.copy()
    upper = data.features.copy()
    lower[:, feature_index] = edges[idx]
    upper[:, feature_index] = edges[idx + 1]
    diffs = pred.predict(upper) - pred.predict(lower)

    counts = np.bincount(idx, minlength=k).astype(float)
    sums = np.bincount(idx, weights=diffs, minlength=k)
    local = np.divide(sums, counts, out=np.zeros(k), where=counts > 0)
    accumulated = np.concatenate([[0.0], np.cumsum(local)])

    # data-weighted centering: each observation sits at its interval's
    # accumulated midpoint
    mids = 0.5 * (accumulated[:-1] + accumulated[1:])
    offset = float(np.sum(mids * counts) / counts.sum())
    values = accumulated - offset
    grid = Grid(feature_index, edges, "quantile")
    return EffectCurve(grid, values, "ale", centered=True)


def mplot(pred, data: Dataset, grid: Grid, neighborhood_fraction: float = 0.1) -> EffectCurve:
    """Conditional (marginal-plot) effect via a nearest-neighbor window.

    At each grid value, averages the predictions of the closest
    ceil(fraction * n) observations by feature distance, keeping their own
    remaining feature values. Entangles effects of dependent features by
    construction.
    """
    if not 0.0 < neighborhood_fraction <= 1.0:
        raise ValueError("neighborhood_fraction must be in (0, 1]")
    pred = as_predictor(pred)
    x = data.features[:, grid.feature_index]
    k = max(1, int(np.ceil(neighborhood_fraction * data.n)))
    preds = pred.predict(data.features)
    values = np.empty(len(grid))
    for gi, g in enumerate(grid.values):
        nearest = np.argsort(np.abs(x - g), kind="stable")[:k]
        values[gi] = preds[nearest].mean()
    return EffectCurve(grid, values, "mplot")


def center_curve(curve: EffectCurve) -> EffectCurve:
    """Subtract the mean level; used when comparing PDP against ALE."""
    return replace(curve, values=curve.values - curve.values.mean(), centered=True)
