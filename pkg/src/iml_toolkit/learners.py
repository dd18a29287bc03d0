"""Built-in regressors so experiments run without user-supplied models.

Thin wrappers over scikit-learn estimators, pinned to the deterministic
prediction contract of :class:`iml_toolkit.core.Predictor`. RBF kernel
ridge stands in for the SVM-with-RBF "good fit" example and a deep random
forest for the boosting "overfitter"; both substitutions are recorded in
every report that uses them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from sklearn.kernel_ridge import KernelRidge
from sklearn.ensemble import RandomForestRegressor
from sklearn.neighbors import KNeighborsRegressor

from .core import Dataset, Predictor

LEARNER_KINDS = ("ols_linear", "knn", "kernel_ridge_rbf", "random_forest")


@dataclass(frozen=True)
class LearnerSpec:
    """Declarative learner choice: kind plus kind-specific hyperparameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(
                f"unknown learner kind {self.kind!r}; expected one of {LEARNER_KINDS}"
            )
        for key, val in self.params.items():
            if isinstance(val, (int, float)) and not isinstance(val, bool):
                if key in ("k", "n_trees", "max_depth", "ridge", "gamma") and val <= 0:
                    raise ValueError(f"hyperparameter {key!r} must be positive")


def median_heuristic_gamma(X: np.ndarray) -> float:
    """RBF gamma = 1 / median squared pairwise distance (parameter-free)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] > 1000:
        X = X[:: X.shape[0] // 1000 + 1]
    d2 = pdist(X, "sqeuclidean")
    med = float(np.median(d2[d2 > 0])) if np.any(d2 > 0) else 1.0
    return 1.0 / med


class FittedModel:
    """A fitted learner exposing the Predictor contract."""

    def __init__(self, spec: LearnerSpec, predict_fn, extras: dict | None = None):
        self.spec = spec
        self.predictor = Predictor(predict_fn, name=spec.kind)
        self.extras = extras or {}

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predictor.predict(X)


def _fit_ols(data: Dataset) -> FittedModel:
    X = np.column_stack([data.features, np.ones(data.n)])
    gram = X.T @ X
    # near-singular designs get a tiny ridge jitter instead of failing
    if np.linalg.cond(gram) > 1e12:
        warnings.warn("singular design matrix; applying ridge jitter 1e-8")
        gram = gram + 1e-8 * np.eye(gram.shape[0])
    beta = np.linalg.solve(gram, X.T @ data.target)
    coef, intercept = beta[:-1].copy(), float(beta[-1])

    def predict(M):
        return M @ coef + intercept

    return FittedModel(
        LearnerSpec("ols_linear"), predict, {"coef": coef, "intercept": intercept}
    )


def fit(spec: LearnerSpec, data: Dataset, seed: int = 0) -> FittedModel:
    """Fit a learner; deterministic given (spec, data, seed)."""
    p = spec.params
    if spec.kind == "ols_linear":
        return _fit_ols(data)

    if spec.kind == "knn":
        k = int(p.get("k", 5))
        if data.n < k:
            raise ValueError(f"knn requires n >= k (n={data.n}, k={k})")
        est = KNeighborsRegressor(n_neighbors=k).fit(data.features, data.target)
        return FittedModel(spec, est.predict)

    if spec.kind == "kernel_ridge_rbf":
        gamma = p.get("gamma")
        if gamma is None:
            gamma = median_heuristic_gamma(data.features)
        lam = float(p.get("ridge", 1.0))
        est = KernelRidge(alpha=lam, kernel="rbf", gamma=float(gamma))
        est.fit(data.features, data.target)
        return FittedModel(spec, est.predict, {"gamma": float(gamma), "ridge": lam})

    if spec.kind == "random_forest":
        est = RandomForestRegressor(
            n_estimators=int(p.get("n_trees", 100)),
            max_depth=p.get("max_depth"),
            max_features=p.get("max_features", 1.0),
            min_samples_leaf=int(p.get("min_samples_leaf", 1)),
            bootstrap=bool(p.get("bootstrap", True)),
            random_state=int(np.random.SeedSequence(seed).generate_state(1)[0]),
            n_jobs=int(p.get("n_jobs", 1)),
        )
        est.fit(data.features, data.target)
        return FittedModel(spec, est.predict)

    raise ValueError(f"unknown learner kind {spec.kind!r}")


def deep_forest_spec(n_trees: int = 100, **extra) -> LearnerSpec:
    """Fully-grown bagged forest used as the flexible overfitter."""
    return LearnerSpec("random_forest", {"n_trees": n_trees, "max_depth": None, **extra})


def oracle_predictor(dgp_id: str) -> Predictor:
    """Noise-free structural mean of a registered data-generating process."""
    from . import dgp  # deferred: dgp imports nothing from learners

    spec = dgp.get_dgp(dgp_id)
    return Predictor(spec.mean, name=f"oracle:{dgp_id}")
