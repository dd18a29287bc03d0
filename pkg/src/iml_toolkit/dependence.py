"""Dependence measures and extrapolation diagnostics.

Pearson, Spearman, and the HSIC V-statistic with RBF kernels; p-values
always come from permutation, never from asymptotic approximations. The
extrapolation score flags perturbed points that fall outside the training
data envelope, measured by standardized nearest-neighbor distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import pearsonr, rankdata

from .core import Dataset, build_grid, rng_from_seed, spawn_seeds


@dataclass(frozen=True)
class DependenceReport:
    pearson: float
    spearman: float
    hsic: float
    pearson_p: float | None = None
    hsic_p: float | None = None
    n_permutations: int = 0


@dataclass(frozen=True)
class ExtrapolationReport:
    strategy: str
    score: float
    threshold_distance: float
    flagged_points: np.ndarray


def _check_pair(x, y, min_len=3):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size or x.size < min_len:
        raise ValueError(f"need equal-length vectors of at least {min_len}")
    return x, y


def pearson(x, y) -> float:
    x, y = _check_pair(x, y)
    if x.std() == 0 or y.std() == 0:
        raise ValueError("constant input has no defined correlation")
    return float(pearsonr(x, y).statistic)


def spearman(x, y) -> float:
    """Rank correlation: Pearson on average ranks."""
    x, y = _check_pair(x, y)
    return pearson(rankdata(x), rankdata(y))


def _rbf_gram(v: np.ndarray) -> np.ndarray:
    d2 = (v[:, None] - v[None, :]) ** 2
    pos = d2[d2 > 0]
    med = float(np.median(pos)) if pos.size else 1.0
    return np.exp(-d2 / med)


def hsic(x, y) -> float:
    """Biased HSIC V-statistic with median-heuristic RBF kernels."""
    x, y = _check_pair(x, y, min_len=10)
    if x.std() == 0 or y.std() == 0:
        return 0.0
    K, L = _rbf_gram(x), _rbf_gram(y)
    n = x.size
    H = np.eye(n) - np.full((n, n), 1.0 / n)
    Kc = H @ K @ H
    Lc = H @ L @ H
    return float(np.sum(Kc * Lc) / n**2)


def independence_test(x, y, statistic: str = "hsic",
                      n_permutations: int = 500, seed: int = 0) -> float:
    """Permutation p-value for H0: x and y are independent.

    Pearson is two-sided via the absolute statistic; p-values use the
    (1 + exceedances) / (n + 1) convention and are never exactly zero.
    """
    if n_permutations < 99:
        raise ValueError("need at least 99 permutations")
    x, y = _check_pair(x, y)
    rng = rng_from_seed(seed)
    if statistic == "pearson":
        observed = abs(pearson(x, y))
        exceed = sum(
            abs(pearson(x, y[rng.permutation(y.size)])) >= observed
            for _ in range(n_permutations)
        )
    elif statistic == "hsic":
        # permute the centered y-kernel instead of recomputing kernels
        K, L = _rbf_gram(x), _rbf_gram(y)
        n = x.size
        H = np.eye(n) - np.full((n, n), 1.0 / n)
        Kc = H @ K @ H
        Lc = H @ L @ H
        observed = float(np.sum(Kc * Lc) / n**2)
        exceed = 0
        for _ in range(n_permutations):
            perm = rng.permutation(n)
            stat = float(np.sum(Kc * Lc[np.ix_(perm, perm)]) / n**2)
            exceed += stat >= observed
    else:
        raise ValueError("statistic must be 'pearson' or 'hsic'")
    return (1 + exceed) / (n_permutations + 1)


def dependence_report(x, y, n_permutations: int = 500, seed: int = 0) -> DependenceReport:
    s1, s2 = spawn_seeds(seed, 2)
    return DependenceReport(
        pearson=pearson(x, y),
        spearman=spearman(x, y),
        hsic=hsic(x, y),
        pearson_p=independence_test(x, y, "pearson", n_permutations, s1),
        hsic_p=independence_test(x, y, "hsic", n_permutations, s2),
        n_permutations=n_permutations,
    )


def perturbation_points(data: Dataset, feature_index: int,
                        strategy: str = "equidistant", size: int = 20,
                        seed: int = 0) -> np.ndarray:
    """Exactly the synthetic points a grid/permutation perturbation creates.

    Every observation is copied once per replacement value of the feature
    (Cartesian product). Strategy "permuted" shuffles the observed column
    once, producing n points with the value multiset preserved.
    """
    if strategy == "permuted":
        perm = rng_from_seed(seed).permutation(data.n)
        out = data.features.copy()
        out[:, feature_index] = out[perm, feature_index]
        return out
    grid = build_grid(data, feature_index, strategy, size, seed=seed)
    tiled = np.repeat(data.features, len(grid), axis=0)
    tiled[:, feature_index] = np.tile(grid.values, data.n)
    return tiled


def extrapolation_score(train: Dataset, synthetic_points: np.ndarray,
                        quantile: float = 0.95,
                        strategy: str = "unknown") -> ExtrapolationReport:
    """Fraction of synthetic points outside the training data envelope.

    Distances are Euclidean after per-feature standardization by training
    std; the envelope threshold is the given quantile of the training
    points' leave-one-out nearest-neighbor distances.
    """
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie strictly between 0 and 1")
    synthetic = np.atleast_2d(np.asarray(synthetic_points, dtype=np.float64))
    if synthetic.shape[1] != train.p:
        raise ValueError("synthetic points must have the training feature count")
    sd = train.features.std(axis=0)
    sd[sd == 0] = 1.0
    ref = train.features / sd
    tree = cKDTree(ref)
    self_dist = tree.query(ref, k=2)[0][:, 1]
    threshold = float(np.quantile(self_dist, quantile))
    dist = tree.query(synthetic / sd, k=1)[0]
    flagged = dist > threshold
    return ExtrapolationReport(
        strategy=strategy,
        score=float(flagged.mean()),
        threshold_distance=threshold,
        flagged_points=synthetic[flagged],
    )


def dependence_matrix(data: Dataset, n_permutations: int = 199, seed: int = 0):
    """All-pairs dependence summary, as rows of
    (feature_a, feature_b, pearson, spearman, hsic, hsic_p)."""
    rows = []
    seeds = spawn_seeds(seed, data.p * data.p)
    for a in range(data.p):
        for b in range(a + 1, data.p):
            x, y = data.features[:, a], data.features[:, b]
            rows.append((
                data.feature_names[a], data.feature_names[b],
                pearson(x, y), spearman(x, y), hsic(x, y),
                independence_test(x, y, "hsic", n_permutations, seeds[a * data.p + b]),
            ))
    return rows
