"""Feature-importance estimators.

Marginal and conditional permutation importance, exact and
ordering-sampled Shapley values, SHAP-style mean-absolute importance,
marginal/conditional SAGE, and grouped permutation importance.

Seeding contract: every estimator derives one child seed per
(replicate, feature) or (ordering) work unit from the master seed, so
results are identical regardless of evaluation order or worker count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from .core import Dataset, Loss, SQUARED_ERROR, as_predictor, rng_from_seed, spawn_seeds

MIN_LEAF_SIZE = 20
MAX_EXACT_SHAPLEY_P = 15


@dataclass(frozen=True)
class ImportanceResult:
    """Per-feature (or per-group) scores with their replicate distribution."""

    unit: str  # "feature" | "group"
    names: tuple[str, ...]
    scores: np.ndarray
    replicates: np.ndarray  # (n_replicates, n_units)
    quantile_bands: np.ndarray  # (n_units, 2) -> (q05, q95)
    p_values: np.ndarray | None = None

    def band(self, j: int) -> tuple[float, float]:
        return float(self.quantile_bands[j, 0]), float(self.quantile_bands[j, 1])

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["name", "score", "q05", "q95"]
            if self.p_values is not None:
                header.append("p_value")
            writer.writerow(header)
            for j, name in enumerate(self.names):
                row = [name, repr(float(self.scores[j])),
                       repr(float(self.quantile_bands[j, 0])),
                       repr(float(self.quantile_bands[j, 1]))]
                if self.p_values is not None:
                    row.append(repr(float(self.p_values[j])))
                writer.writerow(row)


def _result(unit, names, replicates) -> ImportanceResult:
    replicates = np.asarray(replicates, dtype=np.float64)
    bands = np.quantile(replicates, [0.05, 0.95], axis=0).T
    return ImportanceResult(unit, tuple(names), replicates.mean(axis=0), replicates, bands)


def pfi(
    pred,
    data: Dataset,
    loss: Loss = SQUARED_ERROR,
    repeats: int = 10,
    seed: int = 0,
) -> ImportanceResult:
    """Marginal permutation feature importance: loss increase when one
    feature column is permuted, averaged over `repeats` permutations.

    Conventionally run on held-out data; it measures contribution to
    generalization error, not mechanistic reliance.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    pred = as_predictor(pred)
    n, p = data.n, data.p
    baseline = loss(data.target, pred.predict(data.features))
    replicates = np.empty((repeats, p))
    # batch all single-feature perturbations of one repeat into as few
    # model calls as memory allows; per-row predictions are unaffected
    chunk = max(1, min(p, 4_000_000 // (n * p + 1)))
    for r, rep_seed in enumerate(spawn_seeds(seed, repeats)):
        unit_seeds = spawn_seeds(rep_seed, p)
        for start in range(0, p, chunk):
            cols = range(start, min(start + chunk, p))
            blocks = []
            for j in cols:
                X = data.features.copy()
                perm = rng_from_seed(unit_seeds[j]).permutation(n)
                X[:, j] = X[perm, j]
                blocks.append(X)
            preds = pred.predict(np.concatenate(blocks, axis=0)).reshape(len(blocks), n)
            for b, j in enumerate(cols):
                replicates[r, j] = loss(data.target, preds[b]) - baseline
    return _result("feature", data.feature_names, replicates)


class ConditionalSampler:
    """Subgroup-based conditional permutation for one feature.

    A CART tree predicts feature j from the remaining features; the
    leaves partition the data into subgroups within which j is permuted,
    approximately preserving its conditional distribution.
    """

    def __init__(self, feature_index: int, leaf_ids: np.ndarray, n_leaves: int):
        self.feature_index = feature_index
        self.leaf_ids = leaf_ids
        self.n_leaves = n_leaves
        self._groups = [np.flatnonzero(leaf_ids == leaf) for leaf in np.unique(leaf_ids)]

    def permutation(self, rng: np.random.Generator) -> np.ndarray:
        """Row permutation that only moves observations within a leaf."""
        perm = np.arange(self.leaf_ids.size)
        for group in self._groups:
            perm[group] = group[rng.permutation(group.size)]
        return perm


def fit_conditional_sampler(
    data: Dataset, feature_index: int, max_leaves: int = 30, seed: int = 0
) -> ConditionalSampler:
    """Fit the leaf partition for within-leaf conditional permutation."""
    if max_leaves < 1:
        raise ValueError("max_leaves must be >= 1")
    if data.n < 2 * MIN_LEAF_SIZE or max_leaves == 1:
        if data.n < 2 * MIN_LEAF_SIZE:
            warnings.warn(
                "too few observations for conditional sampling; "
                "falling back to a single leaf (marginal permutation)"
            )
        return ConditionalSampler(feature_index, np.zeros(data.n, dtype=int), 1)
    rest = np.delete(np.arange(data.p), feature_index)
    tree = DecisionTreeRegressor(
        max_leaf_nodes=max_leaves,
        min_samples_leaf=MIN_LEAF_SIZE,
        random_state=seed % (2**32),
    )
    tree.fit(data.features[:, rest], data.features[:, feature_index])
    leaves = tree.apply(data.features[:, rest])
    return ConditionalSampler(feature_index, leaves, int(np.unique(leaves).size))


def cfi(
    pred,
    data: Dataset,
    loss: Loss = SQUARED_ERROR,
    samplers: ConditionalSampler | list[ConditionalSampler] | None = None,
    repeats: int = 10,
    seed: int = 0,
) -> ImportanceResult:
    """Conditional feature importance: PFI with within-leaf permutations.

    With a single all-covering leaf this reproduces marginal PFI exactly
    for the same seed (shared per-(repeat, feature) seed derivation).
    """
    if samplers is None:
        raise ValueError("cfi requires fitted ConditionalSamplers")
    if isinstance(samplers, ConditionalSampler):
        samplers = [samplers]
    pred = as_predictor(pred)
    baseline = loss(data.target, pred.predict(data.features))
    replicates = np.empty((repeats, len(samplers)))
    names = [data.feature_names[s.feature_index] for s in samplers]
    for r, rep_seed in enumerate(spawn_seeds(seed, repeats)):
        unit_seeds = spawn_seeds(rep_seed, data.p)
        for c, sampler in enumerate(samplers):
            j = sampler.feature_index
            perm = sampler.permutation(rng_from_seed(unit_seeds[j]))
            X = data.features.copy()
            X[:, j] = X[perm, j]
            replicates[r, c] = loss(data.target, pred.predict(X)) - baseline
    return _result("feature", names, replicates)


def grouped_pfi(
    pred,
    data: Dataset,
    loss: Loss = SQUARED_ERROR,
    groups: dict[str, list[int]] | None = None,
    repeats: int = 10,
    seed: int = 0,
) -> ImportanceResult:
    """Permutation importance of feature groups.

    All columns of a group share one row permutation, preserving
    within-group association while breaking the link to everything else.
    A group's seed is the per-(repeat, feature) seed of its first member,
    so an all-singleton partition reproduces `pfi` bit for bit.
    """
    if not groups:
        raise ValueError("groups must be a nonempty partition")
    flat = [j for idx in groups.values() for j in idx]
    if len(flat) != len(set(flat)):
        raise ValueError("groups overlap")
    if not all(0 <= j < data.p for j in flat):
        raise ValueError("group index out of range")
    pred = as_predictor(pred)
    baseline = loss(data.target, pred.predict(data.features))
    names = list(groups)
    replicates = np.empty((repeats, len(groups)))
    for r, rep_seed in enumerate(spawn_seeds(seed, repeats)):
        unit_seeds = spawn_seeds(rep_seed, data.p)
        for c, name in enumerate(names):
            idx = list(groups[name])
            perm = rng_from_seed(unit_seeds[min(idx)]).permutation(data.n)
            X = data.features.copy()
            X[np.arange(data.n)[:, None], idx] = X[perm[:, None], idx]
            replicates[r, c] = loss(data.target, pred.predict(X)) - baseline
    return _result("group", names, replicates)


# ---------------------------------------------------------------------------
# Shapley values


@dataclass(frozen=True)
class ShapleyExplanation:
    """Additive attribution of one prediction to the features."""

    phi: np.ndarray
    base_value: float
    n_orderings: int
    instance_index: int | None = None
    std_errors: np.ndarray | None = None
    contributions: np.ndarray | None = field(default=None, repr=False)

    @property
    def prediction(self) -> float:
        return self.base_value + float(self.phi.sum())


def shapley_exact(pred, background: Dataset, instance: np.ndarray,
                  instance_index: int | None = None) -> ShapleyExplanation:
    """Exact Shapley values by subset enumeration (p <= 15).

    Value function: mean prediction over background rows with the
    coalition's features fixed to the instance values.
    """
    pred = as_predictor(pred)
    p = background.p
    if p > MAX_EXACT_SHAPLEY_P:
        raise ValueError(
            f"p={p} too large for exact enumeration; use shapley_sampled"
        )
    instance = np.asarray(instance, dtype=np.float64).reshape(-1)
    if instance.size != p:
        raise ValueError("instance length must equal feature count")
    v = np.empty(2**p)
    for mask in range(2**p):
        M = background.features.copy()
        fixed = [j for j in range(p) if mask >> j & 1]
        M[:, fixed] = instance[fixed]
        v[mask] = pred.predict(M).mean()
    fact = [math.factorial(k) for k in range(p + 1)]
    phi = np.zeros(p)
    for mask in range(2**p):
        s = bin(mask).count("1")
        for j in range(p):
            if not mask >> j & 1:
                w = fact[s] * fact[p - s - 1] / fact[p]
                phi[j] += w * (v[mask | (1 << j)] - v[mask])
    return ShapleyExplanation(phi, float(v[0]), 2**p, instance_index)


def shapley_sampled(pred, background: Dataset, instance: np.ndarray,
                    n_orderings: int = 200, seed: int = 0,
                    instance_index: int | None = None) -> ShapleyExplanation:
    """Shapley values by sampling random feature orderings.

    Unbiased; the estimator variance shrinks as 1/m in the number of
    orderings. Per-ordering contributions are kept for standard errors.
    """
    if n_orderings < 1:
        raise ValueError("n_orderings must be >= 1")
    pred = as_predictor(pred)
    p, nb = background.p, background.n
    instance = np.asarray(instance, dtype=np.float64).reshape(-1)
    base = float(pred.predict(background.features).mean())

    contribs = np.empty((n_orderings, p))
    max_rows = 400_000
    chunk = max(1, max_rows // ((p + 1) * nb))
    seeds = spawn_seeds(seed, n_orderings)
    for start in range(0, n_orderings, chunk):
        orderings = [rng_from_seed(s).permutation(p) for s in seeds[start:start + chunk]]
        blocks = []
        for order in orderings:
            M = np.repeat(background.features[None, :, :], p + 1, axis=0)
            for step, j in enumerate(order):
                M[step + 1:, :, j] = instance[j]
            blocks.append(M.reshape(-1, p))
        preds = pred.predict(np.concatenate(blocks, axis=0))
        preds = preds.reshape(len(orderings), p + 1, nb).mean(axis=2)
        for o, order in enumerate(orderings):
            contribs[start + o, order] = np.diff(preds[o])
    phi = contribs.mean(axis=0)
    se = contribs.std(axis=0, ddof=1) / math.sqrt(n_orderings) if n_orderings > 1 else None
    return ShapleyExplanation(phi, base, n_orderings, instance_index, se, contribs)


def shap_importance(pred, background: Dataset, eval_data: Dataset,
                    n_orderings: int = 30, seed: int = 0) -> ImportanceResult:
    """Global importance as the mean absolute Shapley value per feature."""
    if eval_data.n < 1:
        raise ValueError("eval_data must be nonempty")
    rows = np.empty((eval_data.n, eval_data.p))
    for i, row_seed in enumerate(spawn_seeds(seed, eval_data.n)):
        expl = shapley_sampled(
            pred, background, eval_data.features[i], n_orderings, row_seed, i
        )
        rows[i] = np.abs(expl.phi)
    return _result("feature", eval_data.feature_names, rows)


# ---------------------------------------------------------------------------
# SAGE


class _SubsetImputer:
    """Conditional draws of one column given an arbitrary known subset.

    One CART partition per (feature, known-subset) pair, fitted lazily and
    cached; the empty subset degenerates to a marginal permutation.
    """

    def __init__(self, data: Dataset, max_leaves: int, min_leaf: int, seed: int):
        self.data = data
        self.max_leaves = max_leaves
        self.min_leaf = min_leaf
        self.seed = seed
        self._cache: dict[tuple, list[np.ndarray]] = {}

    def groups(self, j: int, known: frozenset[int]) -> list[np.ndarray]:
        known = frozenset(known) - {j}
        key = (j, tuple(sorted(known)))
        if key in self._cache:
            return self._cache[key]
        n = self.data.n
        if not known or n < 2 * self.min_leaf:
            groups = [np.arange(n)]
        else:
            cols = sorted(known)
            tree = DecisionTreeRegressor(
                max_leaf_nodes=self.max_leaves,
                min_samples_leaf=self.min_leaf,
                random_state=self.seed % (2**32),
            )
            tree.fit(self.data.features[:, cols], self.data.features[:, j])
            leaves = tree.apply(self.data.features[:, cols])
            groups = [np.flatnonzero(leaves == leaf) for leaf in np.unique(leaves)]
        self._cache[key] = groups
        return groups

    def draw(self, j: int, known: frozenset[int], rng: np.random.Generator) -> np.ndarray:
        """Column j redrawn by within-group permutation, conditioning on `known`."""
        col = self.data.features[:, j].copy()
        for group in self.groups(j, known):
            col[group] = col[group[rng.permutation(group.size)]]
        return col


def sage(
    pred,
    data: Dataset,
    loss: Loss = SQUARED_ERROR,
    mode: str = "marginal",
    n_orderings: int = 20,
    seed: int = 0,
    max_leaves: int = 30,
    min_leaf: int = MIN_LEAF_SIZE,
) -> ImportanceResult:
    """Shapley attribution of the achievable loss reduction.

    The value function is the expected loss drop from knowing a feature
    subset; unknown features are imputed marginally (mode="marginal") or
    by within-leaf conditional draws given the known subset
    (mode="conditional"). Estimated by sampling feature orderings; per
    ordering the contributions sum exactly to the total loss reduction.
    """
    if mode not in ("marginal", "conditional"):
        raise ValueError("mode must be 'marginal' or 'conditional'")
    if n_orderings < 1:
        raise ValueError("n_orderings must be >= 1")
    pred = as_predictor(pred)
    n, p = data.n, data.p
    imputer = _SubsetImputer(data, max_leaves, min_leaf, seed)
    replicates = np.empty((n_orderings, p))
    for o, o_seed in enumerate(spawn_seeds(seed, n_orderings)):
        rng = rng_from_seed(o_seed)
        order = rng.permutation(p)
        current = np.column_stack(
            [imputer.draw(j, frozenset(), rng) for j in range(p)]
        )
        loss_prev = loss(data.target, pred.predict(current))
        known: set[int] = set()
        for j in order:
            known.add(int(j))
            current[:, j] = data.features[:, j]
            if mode == "conditional":
                for u in range(p):
                    if u not in known:
                        current[:, u] = imputer.draw(u, frozenset(known), rng)
            loss_new = loss(data.target, pred.predict(current))
            replicates[o, j] = loss_prev - loss_new
            loss_prev = loss_new
    return _result("feature", data.feature_names, replicates)
