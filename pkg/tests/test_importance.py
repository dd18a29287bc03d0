import itertools
import math

import numpy as np
import pytest

from iml_toolkit import dgp
from iml_toolkit.core import Dataset, Predictor, rng_from_seed, spawn_seeds
from iml_toolkit.importance import (
    cfi,
    fit_conditional_sampler,
    grouped_pfi,
    pfi,
    sage,
    shap_importance,
    shapley_exact,
    shapley_sampled,
)
from iml_toolkit.learners import deep_forest_spec, fit


def uniform_data(n=400, p=4, seed=0):
    rng = rng_from_seed(seed)
    X = rng.uniform(size=(n, p))
    y = X[:, 0] + rng.normal(scale=0.1, size=n)
    return Dataset.from_arrays(X, y)


# ---------------------------------------------------------------- PFI

def test_pfi_unused_feature_scores_zero():
    f = Predictor(lambda X: X[:, 0] * 2.0)
    data = uniform_data(seed=1)
    res = pfi(f, data, repeats=20, seed=2)
    for j in (1, 2, 3):
        lo, hi = res.quantile_bands[j]
        assert lo == 0.0 == hi  # untouched column, identical predictions
        assert res.scores[j] == 0.0


def test_pfi_identity_model_equals_twice_variance():
    # E[(x - x')^2] = 2 Var(x) for an independent permutation partner
    rng = rng_from_seed(3)
    X = rng.uniform(size=(4000, 1))
    data = Dataset.from_arrays(X, X[:, 0])
    res = pfi(Predictor(lambda M: M[:, 0]), data, repeats=20, seed=4)
    assert res.scores[0] == pytest.approx(1 / 6, rel=0.10)


def test_pfi_seed_determinism():
    data = uniform_data(seed=5)
    f = Predictor(lambda X: X[:, 0] + X[:, 2])
    a = pfi(f, data, repeats=5, seed=6)
    b = pfi(f, data, repeats=5, seed=6)
    assert np.array_equal(a.replicates, b.replicates)


def test_pfi_scores_are_replicate_means():
    data = uniform_data(seed=7)
    f = Predictor(lambda X: X[:, 0] ** 2)
    res = pfi(f, data, repeats=12, seed=8)
    np.testing.assert_allclose(res.scores, res.replicates.mean(axis=0), atol=1e-14)


# ---------------------------------------------------------------- CFI

def test_single_leaf_sampler_reproduces_pfi_bitwise():
    data = uniform_data(seed=9)
    f = Predictor(lambda X: X[:, 0] + 0.5 * X[:, 1])
    samplers = [fit_conditional_sampler(data, j, max_leaves=1) for j in range(data.p)]
    marginal = pfi(f, data, repeats=8, seed=10)
    conditional = cfi(f, data, samplers=samplers, repeats=8, seed=10)
    assert np.array_equal(marginal.replicates, conditional.replicates)


def test_cfi_close_to_pfi_for_independent_features():
    data = dgp.sample("fig6_flat", 1500, 11)
    model = fit(deep_forest_spec(30), data, 12)
    samplers = [fit_conditional_sampler(data, j, max_leaves=50, seed=13)
                for j in range(3)]
    marginal = pfi(model, data, repeats=30, seed=14)
    conditional = cfi(model, data, samplers=samplers, repeats=30, seed=14)
    for c, sampler in enumerate(samplers):
        j = sampler.feature_index
        scale = max(marginal.scores.max(), 0.1)
        assert abs(conditional.scores[c] - marginal.scores[j]) < 0.35 * scale


def test_duplicated_feature_sampler_preserves_relation():
    rng = rng_from_seed(15)
    x = rng.uniform(size=600)
    X = np.column_stack([x, x, rng.uniform(size=600)])
    data = Dataset.from_arrays(X, x)
    sampler = fit_conditional_sampler(data, 1, max_leaves=30, seed=16)
    perm = sampler.permutation(rng_from_seed(17))
    # permuted duplicate stays within leaf width of its partner
    assert np.max(np.abs(X[perm, 1] - X[:, 0])) < 0.2
    assert np.mean(np.abs(X[perm, 1] - X[:, 0])) < 0.05


def test_cfi_unused_feature_mean_zero_over_seeds():
    f = Predictor(lambda X: X[:, 0])
    scores = []
    for s in spawn_seeds(18, 20):
        data = uniform_data(n=300, seed=s)
        sampler = fit_conditional_sampler(data, 2, max_leaves=10, seed=s)
        res = cfi(f, data, samplers=sampler, repeats=5, seed=s)
        scores.append(res.scores[0])
    scores = np.asarray(scores)
    se = scores.std(ddof=1) / math.sqrt(len(scores))
    assert abs(scores.mean()) <= max(2 * se, 1e-12)


# ---------------------------------------------------------------- grouped PFI

def test_singleton_groups_reproduce_pfi():
    data = uniform_data(seed=19)
    f = Predictor(lambda X: X[:, 0] - X[:, 3])
    groups = {name: [j] for j, name in enumerate(data.feature_names)}
    a = pfi(f, data, repeats=7, seed=20)
    b = grouped_pfi(f, data, groups=groups, repeats=7, seed=20)
    assert np.array_equal(a.replicates, b.replicates)


def test_correlated_group_scores_higher_than_split_cfi():
    rng = rng_from_seed(21)
    x = rng.uniform(size=800)
    X = np.column_stack([x, x + 0.01 * rng.normal(size=800), rng.uniform(size=800)])
    y = X[:, 0] + X[:, 1]
    data = Dataset.from_arrays(X, y)
    f = Predictor(lambda M: M[:, 0] + M[:, 1])
    group = grouped_pfi(f, data, groups={"pair": [0, 1]}, repeats=10, seed=22)
    samplers = [fit_conditional_sampler(data, j, max_leaves=40, seed=23)
                for j in (0, 1)]
    split = cfi(f, data, samplers=samplers, repeats=10, seed=24)
    assert group.scores[0] > split.scores.sum()


def test_all_features_group_matches_full_permutation():
    data = uniform_data(seed=25)
    f = Predictor(lambda X: X[:, 0] * X[:, 1] + X[:, 2])
    res = grouped_pfi(f, data, groups={"all": list(range(data.p))},
                      repeats=6, seed=26)
    # replicate by hand with the same derived permutation seed
    from iml_toolkit.core import SQUARED_ERROR
    baseline = SQUARED_ERROR(data.target, f.predict(data.features))
    rep0_seed = spawn_seeds(spawn_seeds(26, 6)[0], data.p)[0]
    perm = rng_from_seed(rep0_seed).permutation(data.n)
    shuffled = data.features[perm]
    expected = SQUARED_ERROR(data.target, f.predict(shuffled)) - baseline
    assert res.replicates[0, 0] == pytest.approx(expected, abs=1e-12)


def test_group_of_unused_features_scores_zero():
    data = uniform_data(seed=27)
    f = Predictor(lambda X: X[:, 0])
    res = grouped_pfi(f, data, groups={"dead": [1, 2]}, repeats=5, seed=28)
    assert np.all(res.replicates == 0.0)


# ---------------------------------------------------------------- Shapley

def brute_force_shapley(f, background, instance):
    """Literal subset-enumeration Shapley, independent of the package path."""
    p = background.shape[1]
    phi = np.zeros(p)
    def value(S):
        M = np.repeat(instance[None, :], len(background), axis=0)
        for j in S:
            M[:, j] = M[:, j]
        rest = [k for k in range(p) if k not in S]
        M = background.copy()
        for j in S:
            M[:, j] = instance[j]
        return float(np.mean(f(M)))
    for j in range(p):
        others = [k for k in range(p) if k != j]
        for r in range(p):
            for S in itertools.combinations(others, r):
                w = math.factorial(len(S)) * math.factorial(p - len(S) - 1) / math.factorial(p)
                phi[j] += w * (value(set(S) | {j}) - value(set(S)))
    return phi


def test_exact_shapley_matches_brute_force_and_linear_form():
    rng = rng_from_seed(29)
    bg = Dataset.from_arrays(rng.uniform(size=(40, 4)), np.zeros(40))
    beta = np.array([1.0, -2.0, 0.5, 3.0])
    f = lambda X: X @ beta
    x = rng.uniform(size=4)
    exp = shapley_exact(Predictor(f), bg, x)
    np.testing.assert_allclose(exp.phi, brute_force_shapley(f, bg.features, x),
                               atol=1e-10)
    np.testing.assert_allclose(exp.phi, beta * (x - bg.features.mean(axis=0)),
                               atol=1e-10)


def test_exact_shapley_constant_model_zero():
    bg = uniform_data(n=30, seed=30)
    exp = shapley_exact(Predictor(lambda X: np.full(len(X), 7.0)), bg,
                        bg.features[0])
    assert np.allclose(exp.phi, 0.0, atol=1e-12)
    assert exp.base_value == pytest.approx(7.0)


def test_exact_shapley_symmetry_and_dummy_axioms():
    rng = rng_from_seed(31)
    x = rng.uniform(size=200)
    X = np.column_stack([x, x, rng.uniform(size=200)])
    bg = Dataset.from_arrays(X, np.zeros(200))
    f = Predictor(lambda M: M[:, 0] + M[:, 1])
    instance = np.array([0.8, 0.8, 0.1])
    exp = shapley_exact(f, bg, instance)
    assert exp.phi[0] == pytest.approx(exp.phi[1], abs=1e-10)
    assert exp.phi[2] == pytest.approx(0.0, abs=1e-10)


def test_exact_shapley_efficiency():
    data = dgp.sample("fig3_interaction", 100, 32)
    model = fit(deep_forest_spec(20), data, 33)
    exp = shapley_exact(model, data, data.features[5])
    total = exp.base_value + exp.phi.sum()
    assert total == pytest.approx(float(model.predict(data.features[5:6])[0]),
                                  abs=1e-10)


def test_sampled_shapley_agrees_within_3se():
    data = dgp.sample("fig3_interaction", 120, 34)
    model = fit(deep_forest_spec(20), data, 35)
    x = data.features[11]
    exact = shapley_exact(model, data, x)
    est = shapley_sampled(model, data, x, n_orderings=2000, seed=36)
    assert np.all(np.abs(est.phi - exact.phi) <= 3 * est.std_errors + 1e-12)


def test_sampled_shapley_se_halves_when_m_quadruples():
    data = dgp.sample("fig3_interaction", 120, 37)
    model = fit(deep_forest_spec(20), data, 38)
    x = data.features[3]
    small = shapley_sampled(model, data, x, n_orderings=250, seed=39)
    big = shapley_sampled(model, data, x, n_orderings=1000, seed=40)
    ratio = big.std_errors.mean() / small.std_errors.mean()
    assert ratio == pytest.approx(0.5, rel=0.2)


def test_sampled_shapley_single_feature_exact():
    rng = rng_from_seed(41)
    X = rng.uniform(size=(50, 1))
    bg = Dataset.from_arrays(X, np.zeros(50))
    f = Predictor(lambda M: M[:, 0] ** 2)
    x = np.array([0.5])
    est = shapley_sampled(f, bg, x, n_orderings=1, seed=42)
    assert est.phi[0] == pytest.approx(0.25 - np.mean(X ** 2), abs=1e-12)


def test_shap_importance_linear_closed_form():
    rng = rng_from_seed(43)
    X = rng.uniform(size=(300, 3))
    beta = np.array([2.0, -1.0, 0.0])
    data = Dataset.from_arrays(X, X @ beta)
    f = Predictor(lambda M: M @ beta)
    res = shap_importance(f, data, data.subset(np.arange(100)),
                          n_orderings=40, seed=44)
    expected = [abs(b) * np.mean(np.abs(X[:100, j] - X[:, j].mean()))
                for j, b in enumerate(beta)]
    np.testing.assert_allclose(res.scores, expected, atol=0.02)


# ---------------------------------------------------------------- SAGE

def test_sage_marginal_unused_feature_near_zero():
    f = Predictor(lambda X: X[:, 0])
    rng = rng_from_seed(45)
    X = rng.uniform(size=(500, 3))
    data = Dataset.from_arrays(X, X[:, 0] + 0.1 * rng.normal(size=500))
    res = sage(f, data, mode="marginal", n_orderings=40, seed=46)
    assert res.scores[0] > 5 * abs(res.scores[2])
    assert abs(res.scores[2]) < 0.01


def test_sage_values_sum_to_total_loss_reduction():
    rng = rng_from_seed(47)
    X = rng.uniform(size=(300, 3))
    y = X[:, 0] + 2 * X[:, 1]
    data = Dataset.from_arrays(X, y)
    f = Predictor(lambda M: M[:, 0] + 2 * M[:, 1])
    res = sage(f, data, mode="marginal", n_orderings=60, seed=48)
    # empty-set predictions impute all columns by permutation, so
    # nu(empty) = E[(f(x) - f(x'))^2] = 2 Var(f); nu(full) = 0 here
    expected = 2 * np.var(f.predict(X))
    assert res.scores.sum() == pytest.approx(expected, rel=0.1)


def test_sage_conditional_chain_pattern():
    data = dgp.sample_scm(dgp.CHAIN_SCM, 2000, 49)
    f = Predictor(lambda X: 0.5 * X[:, 1] + 0.5 * X[:, 2])
    res = sage(f, data, mode="conditional", n_orderings=15, seed=50)
    assert np.all(res.scores > 0)


# ---------------------------------------------------------------- divergence

def test_pfi_and_shap_importance_answer_different_questions():
    # some feature ranks top-5 by SHAP importance while its PFI band covers 0
    train = dgp.sample("fig2_noise", 100, 51)
    test = dgp.sample("fig2_noise", 5000, 52)
    model = fit(deep_forest_spec(100), train, 53)
    marginal = pfi(model, test, repeats=15, seed=54)
    shap = shap_importance(model, train, test.subset(np.arange(20)),
                           n_orderings=15, seed=55)
    top5 = set(np.argsort(shap.scores)[-5:])
    covered = {j for j in range(20)
               if marginal.quantile_bands[j, 0] <= 0 <= marginal.quantile_bands[j, 1]}
    assert top5 & covered
