import numpy as np
import pytest

from iml_toolkit import dgp
from iml_toolkit.core import Dataset, rng_from_seed, spawn_seeds
from iml_toolkit.dependence import (
    dependence_report,
    extrapolation_score,
    hsic,
    independence_test,
    pearson,
    perturbation_points,
    spearman,
)


def test_linear_relation_correlations():
    x = np.linspace(0, 1, 100)
    assert pearson(x, 2 * x + 1) == pytest.approx(1.0)
    assert spearman(x, 2 * x + 1) == pytest.approx(1.0)


def test_monotone_nonlinear_relation():
    x = np.linspace(-2, 2, 200)
    y = np.exp(x)
    assert spearman(x, y) == pytest.approx(1.0)
    assert pearson(x, y) < 1.0


def test_ring_has_no_linear_correlation():
    data = dgp.sample("ring_dependence", 2000, 1)
    assert abs(pearson(data.features[:, 0], data.features[:, 1])) < 0.05


# ---------------------------------------------------------------- HSIC

def naive_hsic(x, y, gx, gy):
    """Direct V-statistic evaluation as an independent oracle."""
    n = len(x)
    K = np.exp(-gx * (x[:, None] - x[None, :]) ** 2)
    L = np.exp(-gy * (y[:, None] - y[None, :]) ** 2)
    H = np.eye(n) - np.ones((n, n)) / n
    return float(np.trace(K @ H @ L @ H)) / n ** 2


def test_hsic_matches_direct_formula():
    rng = rng_from_seed(2)
    x = rng.normal(size=60)
    y = x ** 2 + 0.1 * rng.normal(size=60)
    def med_gamma(v):
        d2 = (v[:, None] - v[None, :]) ** 2
        return 1.0 / float(np.median(d2[d2 > 0]))
    expected = naive_hsic(x, y, med_gamma(x), med_gamma(y))
    assert hsic(x, y) == pytest.approx(expected, rel=1e-9)


def test_hsic_symmetric_and_shift_invariant():
    rng = rng_from_seed(3)
    x, y = rng.normal(size=80), rng.normal(size=80)
    assert hsic(x, y) == pytest.approx(hsic(y, x), abs=1e-12)
    assert hsic(x + 5.0, y - 3.0) == pytest.approx(hsic(x, y), abs=1e-12)


def test_hsic_identity_beats_independent_pairing():
    rng = rng_from_seed(4)
    x = rng.normal(size=200)
    assert hsic(x, x) > 10 * hsic(x, rng.permutation(x))


def test_independent_normals_small_hsic_large_p():
    rng = rng_from_seed(5)
    x, y = rng.normal(size=500), rng.normal(size=500)
    assert hsic(x, y) < 0.01
    p = independence_test(x, y, statistic="hsic", n_permutations=199, seed=6)
    assert p > 0.05


def test_ring_hsic_rejects_pearson_does_not():
    data = dgp.sample("ring_dependence", 500, 7)
    rep = dependence_report(data.features[:, 0], data.features[:, 1],
                            n_permutations=500, seed=8)
    assert rep.hsic_p < 0.05
    assert rep.pearson_p > 0.05


def test_permutation_pvalues_never_zero():
    x = np.linspace(0, 1, 100)
    p = independence_test(x, x, statistic="hsic", n_permutations=99, seed=9)
    assert 0 < p <= 1
    assert p == pytest.approx(1 / 100)


def test_type_one_error_calibration():
    rejections = 0
    runs = 200
    for s in spawn_seeds(10, runs):
        rng = rng_from_seed(s)
        x, y = rng.normal(size=60), rng.normal(size=60)
        p = independence_test(x, y, statistic="hsic", n_permutations=99, seed=s)
        rejections += p < 0.05
    assert rejections / runs == pytest.approx(0.05, abs=0.04)


# ---------------------------------------------------------------- extrapolation

def correlated_gaussian(n=400, rho=0.95, seed=11):
    rng = rng_from_seed(seed)
    z = rng.normal(size=(n, 2))
    x1 = z[:, 0]
    x2 = rho * z[:, 0] + np.sqrt(1 - rho ** 2) * z[:, 1]
    return Dataset.from_arrays(np.column_stack([x1, x2]), np.zeros(n))


def test_training_points_never_flagged():
    data = correlated_gaussian()
    rep = extrapolation_score(data, data.features, quantile=0.95)
    assert rep.score == 0.0


def test_equidistant_grid_extrapolates_correlated_features():
    data = correlated_gaussian()
    eq = perturbation_points(data, 0, strategy="equidistant", size=20, seed=12)
    qu = perturbation_points(data, 0, strategy="quantile", size=20, seed=12)
    s_eq = extrapolation_score(data, eq, quantile=0.95).score
    s_qu = extrapolation_score(data, qu, quantile=0.95).score
    assert s_eq > s_qu + 0.1


def test_subsample_perturbation_calibrated_on_independent_features():
    rng = rng_from_seed(13)
    X = rng.uniform(size=(500, 4))
    data = Dataset.from_arrays(X, np.zeros(500))
    pts = perturbation_points(data, 1, strategy="subsample", size=30, seed=14)
    rep = extrapolation_score(data, pts, quantile=0.95)
    assert rep.score == pytest.approx(0.05, abs=0.05)


def test_score_monotone_in_quantile():
    data = correlated_gaussian(seed=15)
    pts = perturbation_points(data, 0, strategy="equidistant", size=15, seed=16)
    scores = [extrapolation_score(data, pts, quantile=q).score
              for q in (0.99, 0.9, 0.8, 0.5)]
    assert all(a <= b for a, b in zip(scores, scores[1:]))


def test_perturbation_point_counts_and_permuted_multiset():
    rng = rng_from_seed(17)
    X = rng.uniform(size=(3, 2))
    data = Dataset.from_arrays(X, np.zeros(3))
    pts = perturbation_points(data, 0, strategy="equidistant", size=2)
    assert pts.shape == (6, 2)
    permuted = perturbation_points(data, 0, strategy="permuted", seed=18)
    assert sorted(permuted[:, 0]) == pytest.approx(sorted(X[:, 0]))
