"""Uncertainty quantification and importance hypothesis testing.

Separates two sources of variance in effect curves: Monte Carlo
estimation on finite samples (model fixed) and model refitting on fresh
data. Importance testing is PIMP: a nonparametric null distribution of
importances from models refit on target-permuted data, with Bonferroni or
Holm correction for multiple comparisons. All bands are empirical
(q05, q95) quantiles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import dgp as dgp_mod
from .core import Dataset, Grid, Loss, SQUARED_ERROR, rng_from_seed, spawn_seeds
from .effects import pdp
from .importance import ImportanceResult, pfi
from .learners import LearnerSpec, fit


@dataclass(frozen=True)
class UncertaintyBand:
    grid: Grid
    mean_curve: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    source: str  # "estimation_only" | "refit"
    n_replicates: int
    replicate_curves: np.ndarray | None = None

    def __post_init__(self):
        if not (np.all(self.lower <= self.mean_curve + 1e-12)
                and np.all(self.mean_curve <= self.upper + 1e-12)):
            raise ValueError("band must bracket the mean curve pointwise")

    @property
    def mean_width(self) -> float:
        return float(np.mean(self.upper - self.lower))

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["grid", "mean", "lower", "upper", "source"])
            for g, m, lo, hi in zip(self.grid.values, self.mean_curve,
                                    self.lower, self.upper):
                writer.writerow([repr(float(g)), repr(float(m)),
                                 repr(float(lo)), repr(float(hi)), self.source])


def _band(grid, curves, source) -> UncertaintyBand:
    curves = np.asarray(curves)
    lower, upper = np.quantile(curves, [0.05, 0.95], axis=0)
    return UncertaintyBand(grid, curves.mean(axis=0), lower, upper,
                           source, curves.shape[0], curves)


def pdp_band_estimation(pred, data: Dataset, grid: Grid, n_replicates: int = 10,
                        subsample_n: int | None = None, seed: int = 0,
                        center: bool = False) -> UncertaintyBand:
    """Monte-Carlo estimation band: PDP on repeated subsamples, model fixed."""
    if n_replicates < 2:
        raise ValueError("need at least 2 replicates")
    subsample_n = subsample_n or data.n
    if subsample_n > data.n:
        raise ValueError("subsample_n cannot exceed n")
    curves = []
    for rep_seed in spawn_seeds(seed, n_replicates):
        rows = rng_from_seed(rep_seed).choice(data.n, size=subsample_n, replace=False)
        curve = pdp(pred, data.subset(rows), grid).values
        curves.append(curve - curve.mean() if center else curve)
    return _band(grid, curves, "estimation_only")


def pdp_band_refit(learner: LearnerSpec, source, grid: Grid,
                   n_replicates: int = 10, n_per_fit: int = 100, seed: int = 0,
                   center: bool = False) -> UncertaintyBand:
    """Model-variance band: fresh data, fresh fit, fresh PDP per replicate.

    `source` is a DGP id / DgpSpec (fresh draws) or a Dataset (bootstrap
    resamples of the fixed data). A fixed Predictor may stand in for the
    learner, in which case only the data draw varies between replicates.
    """
    if n_replicates < 2:
        raise ValueError("need at least 2 replicates")
    fixed = learner if not isinstance(learner, LearnerSpec) else None
    curves = []
    for idx, rep_seed in enumerate(spawn_seeds(seed, n_replicates)):
        draw_seed, fit_seed = spawn_seeds(rep_seed, 2)
        if isinstance(source, Dataset):
            rows = rng_from_seed(draw_seed).choice(source.n, size=n_per_fit, replace=True)
            sample = source.subset(rows)
        else:
            sample = dgp_mod.sample(source, n_per_fit, draw_seed)
        if fixed is not None:
            model = fixed
        else:
            try:
                model = fit(learner, sample, fit_seed)
            except Exception as exc:
                raise RuntimeError(f"refit replicate {idx} failed: {exc}") from exc
        curve = pdp(model, sample, grid).values
        curves.append(curve - curve.mean() if center else curve)
    return _band(grid, curves, "refit")


def pfi_ci(pred, data: Dataset, loss: Loss = SQUARED_ERROR,
           repeats: int = 30, seed: int = 0) -> ImportanceResult:
    """PFI with enough permutation repeats for meaningful quantile bands.

    The model stays fixed; the bands quantify permutation noise only.
    """
    if repeats < 10:
        raise ValueError("confidence bands need at least 10 repeats")
    return pfi(pred, data, loss, repeats, seed)


@dataclass(frozen=True)
class TestedImportance:
    names: tuple[str, ...]
    observed: np.ndarray
    p_values_raw: np.ndarray
    p_values_adjusted: np.ndarray
    method: str  # "bonferroni" | "holm" | "none"
    alpha: float
    significant: np.ndarray

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "observed", "p_raw", "p_adjusted", "significant"])
            for j, name in enumerate(self.names):
                writer.writerow([
                    name, repr(float(self.observed[j])),
                    repr(float(self.p_values_raw[j])),
                    repr(float(self.p_values_adjusted[j])),
                    bool(self.significant[j]),
                ])


def adjust_pvalues(raw, method: str = "bonferroni", alpha: float = 0.05,
                   names=None, observed=None) -> TestedImportance:
    """Multiple-comparison adjustment of raw p-values.

    bonferroni: adjusted = min(1, raw * m). holm: step-down — sort
    ascending, multiply the k-th smallest by (m - k), enforce
    monotonicity. Holm rejects a superset of Bonferroni's rejections.
    """
    raw = np.asarray(raw, dtype=np.float64).reshape(-1)
    if raw.size == 0:
        raise ValueError("empty p-value vector")
    if np.any(raw <= 0) or np.any(raw > 1):
        raise ValueError("raw p-values must lie in (0, 1]")
    m = raw.size
    if method == "bonferroni":
        adjusted = np.minimum(1.0, raw * m)
    elif method == "holm":
        order = np.argsort(raw, kind="stable")
        stepped = np.minimum(1.0, raw[order] * (m - np.arange(m)))
        stepped = np.maximum.accumulate(stepped)
        adjusted = np.empty(m)
        adjusted[order] = stepped
    elif method == "none":
        adjusted = raw.copy()
    else:
        raise ValueError("method must be 'bonferroni', 'holm' or 'none'")
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(m))
    if observed is None:
        observed = np.full(m, np.nan)
    return TestedImportance(tuple(names), np.asarray(observed, dtype=np.float64),
                            raw, adjusted, method, alpha, adjusted < alpha)


def pimp(learner: LearnerSpec, data: Dataset, loss: Loss = SQUARED_ERROR,
         n_target_permutations: int = 30, seed: int = 0,
         pfi_repeats: int = 3) -> TestedImportance:
    """PIMP: importance test against a null of target-permuted refits.

    Observed PFI comes from a model fit on (X, y); each null replicate
    refits the learner on (X, y_permuted) and recomputes PFI. Raw
    p-values are (1 + exceedances) / (s + 1) per feature, uncorrected.
    """
    if n_target_permutations < 20:
        raise ValueError("need at least 20 target permutations")
    fit_seed, obs_seed, perm_master = spawn_seeds(seed, 3)
    model = fit(learner, data, fit_seed)
    observed = pfi(model, data, loss, pfi_repeats, obs_seed).scores

    nulls = []
    for rep_seed in spawn_seeds(perm_master, n_target_permutations):
        y_seed, f_seed, p_seed = spawn_seeds(rep_seed, 3)
        y_perm = data.target[rng_from_seed(y_seed).permutation(data.n)]
        shuffled = Dataset(data.features, y_perm, data.feature_names)
        try:
            null_model = fit(learner, shuffled, f_seed)
        except Exception as exc:  # keep going, but demand most refits succeed
            warnings.warn(f"dropping failed null refit: {exc}")
            continue
        nulls.append(pfi(null_model, shuffled, loss, pfi_repeats, p_seed).scores)
    if len(nulls) < 0.9 * n_target_permutations:
        raise RuntimeError("more than 10% of null refits failed")
    null_mat = np.asarray(nulls)
    s = null_mat.shape[0]
    raw = (1 + (null_mat >= observed[None, :]).sum(axis=0)) / (s + 1)
    return adjust_pvalues(raw, "none", names=data.feature_names, observed=observed)
