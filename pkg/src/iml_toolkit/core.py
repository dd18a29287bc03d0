"""Core data structures: datasets, predictors, losses, grids, seeding."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

GridStrategy = str  # "equidistant" | "quantile" | "subsample"

DEFAULT_GRID_SIZE = 20
DEFAULT_GRID_STRATEGY = "quantile"


class DegenerateFeatureError(ValueError):
    """Raised when an operation needs a non-constant feature."""


def rng_from_seed(seed: int) -> np.random.Generator:
    """Canonical RNG for the whole toolkit; `seed` is a 64-bit unsigned int."""
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, n: int) -> list[int]:
    """Derive `n` independent child seeds from a master seed.

    Work units (replicates, orderings, refits) each get their own derived
    seed so results do not depend on scheduling or worker count.
    """
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in ss.spawn(n)]


@dataclass(frozen=True)
class Dataset:
    """Column-major numeric table with a real-valued target.

    Immutable after construction; safe to share across workers.
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.target, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("target length must match feature rows")
        if X.shape[0] < 2:
            raise ValueError("need at least 2 observations")
        if X.shape[1] < 1:
            raise ValueError("need at least 1 feature")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("missing or non-finite values are not supported")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != X.shape[1]:
            raise ValueError("feature_names length must equal feature count")
        if len(set(names)) != len(names):
            raise ValueError("feature_names must be unique")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def feature_index(self, name: str) -> int:
        return self.feature_names.index(name)

    def subset(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.features[rows], self.target[rows], self.feature_names)

    @staticmethod
    def from_arrays(X, y, feature_names: Sequence[str] | None = None) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        if feature_names is None:
            feature_names = [f"x{j + 1}" for j in range(X.shape[1])]
        return Dataset(X, np.asarray(y, dtype=np.float64), tuple(feature_names))

    @staticmethod
    def from_csv(path, target: str = "target") -> "Dataset":
        """Load from a headered CSV; the target column is named by `target`."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        if target not in header:
            raise ValueError(f"target column {target!r} not found in CSV header")
        tcol = header.index(target)
        data = np.asarray(rows, dtype=np.float64)
        mask = np.arange(len(header)) != tcol
        names = [h for i, h in enumerate(header) if i != tcol]
        return Dataset(data[:, mask], data[:, tcol], tuple(names))

    def to_csv(self, path, target: str = "target") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.feature_names) + [target])
            for xi, yi in zip(self.features, self.target):
                writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


PredictFn = Callable[[np.ndarray], np.ndarray]


class Predictor:
    """Wraps any model into the opaque prediction contract.

    Accepts a plain function (m, p) -> (m,) or an object with `.predict`.
    Predictions never mutate their input and are deterministic.
    """

    def __init__(self, fn: PredictFn | object, name: str = "model"):
        if callable(fn) and not hasattr(fn, "predict"):
            self._fn = fn
        elif hasattr(fn, "predict"):
            self._fn = fn.predict
        else:
            raise TypeError("need a callable or an object with .predict")
        self.name = name

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.asarray(self._fn(X), dtype=np.float64).reshape(-1)
        if out.shape[0] != X.shape[0]:
            raise ValueError("predictor returned wrong number of predictions")
        return out

    __call__ = predict


def as_predictor(model) -> Predictor:
    return model if isinstance(model, Predictor) else Predictor(model)


@dataclass(frozen=True)
class Loss:
    """Mean per-observation loss; nonnegative, zero on perfect predictions."""

    name: str
    pointwise: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, y_true: np.ndarray, y_pred: np.ndarray) -> float:
        y_true = np.asarray(y_true, dtype=np.float64)
        y_pred = np.asarray(y_pred, dtype=np.float64)
        return float(np.mean(self.pointwise(y_true, y_pred)))


SQUARED_ERROR = Loss("squared_error", lambda y, yhat: (y - yhat) ** 2)
ABSOLUTE_ERROR = Loss("absolute_error", lambda y, yhat: np.abs(y - yhat))

_LOSSES = {l.name: l for l in (SQUARED_ERROR, ABSOLUTE_ERROR)}


def get_loss(name: str) -> Loss:
    try:
        return _LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}") from None


@dataclass(frozen=True)
class Grid:
    """Strictly increasing evaluation points for one feature."""

    feature_index: int
    values: np.ndarray
    strategy: GridStrategy

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("grid needs at least 2 values")
        if not np.all(np.diff(v) > 0):
            raise ValueError("grid values must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def build_grid(
    data: Dataset,
    feature_index: int,
    strategy: GridStrategy = DEFAULT_GRID_STRATEGY,
    size: int = DEFAULT_GRID_SIZE,
    seed: int = 0,
) -> Grid:
    """Construct an evaluation grid over one feature.

    equidistant: linearly spaced between observed min and max.
    quantile: linear-interpolation empirical quantiles at k/(size-1),
        deduplicated.
    subsample: `size` distinct observed values drawn without replacement.
    """
    if not 0 <= feature_index < data.p:
        raise ValueError("feature_index out of range")
    if size < 2:
        raise ValueError("grid size must be >= 2")
    x = data.features[:, feature_index]
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        raise DegenerateFeatureError(
            f"degenerate feature: {data.feature_names[feature_index]!r} is constant"
        )
    if strategy == "equidistant":
        values = np.linspace(lo, hi, size)
    elif strategy == "quantile":
        probs = np.arange(size) / (size - 1)
        values = np.unique(np.quantile(x, probs, method="linear"))
    elif strategy == "subsample":
        uniq = np.unique(x)
        if size > uniq.size:
            raise ValueError("subsample grid size exceeds distinct observed values")
        rng = rng_from_seed(seed)
        values = np.sort(rng.choice(uniq, size=size, replace=False))
    else:
        raise ValueError(f"unknown grid strategy {strategy!r}")
    return Grid(feature_index, values, strategy)


def train_test_split(
    data: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Seed-deterministic disjoint row partition into (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n_test = int(round(data.n * test_fraction))
    n_test = min(max(n_test, 1), data.n - 1)
    perm = rng_from_seed(seed).permutation(data.n)
    return data.subset(perm[n_test:]), data.subset(perm[:n_test])


def evaluate(pred, data: Dataset, loss: Loss = SQUARED_ERROR) -> float:
    """Mean loss of a predictor on a dataset."""
    return loss(data.target, as_predictor(pred).predict(data.features))
