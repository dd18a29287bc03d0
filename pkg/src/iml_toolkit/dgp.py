"""Seeded samplers for every simulated data-generating process.

Each registered DGP carries its ground truth (structural mean, noise
variance, per-feature relevance, true interacting pairs) so acceptance
experiments can compare estimates against a known target. Linear Gaussian
structural causal models are sampled in topological order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, rng_from_seed


@dataclass(frozen=True)
class DgpSpec:
    id: str
    p: int
    sampler: Callable[[int, np.random.Generator], Dataset] = field(repr=False)
    mean: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    noise_variance: float = 0.0
    relevant: tuple[bool, ...] = ()
    interacting_pairs: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class Scm:
    """Linear Gaussian structural causal model over named variables.

    `parents[v]` maps each variable to (parent, coefficient) pairs;
    variables are listed in an order that must be topological.
    """

    variables: tuple[str, ...]
    parents: dict
    noise_sd: dict
    target: str = "y"
    feature_order: tuple[str, ...] | None = None

    def __post_init__(self):
        seen = set()
        for v in self.variables:
            for parent, _ in self.parents.get(v, ()):
                if parent not in seen:
                    raise ValueError(
                        f"variable order is not topological (or cyclic) at {v!r}"
                    )
            seen.add(v)


def sample_scm(scm: Scm, n: int, seed: int) -> Dataset:
    """Forward-sample an SCM; the designated target becomes y."""
    rng = rng_from_seed(seed)
    cols = {}
    for v in scm.variables:
        val = rng.normal(0.0, scm.noise_sd.get(v, 1.0), size=n)
        for parent, coef in scm.parents.get(v, ()):
            val = val + coef * cols[parent]
        cols[v] = val
    names = list(scm.feature_order or (v for v in scm.variables if v != scm.target))
    X = np.column_stack([cols[v] for v in names])
    return Dataset(X, cols[scm.target], tuple(names))


CHAIN_SCM = Scm(
    variables=("x1", "x2", "x3", "y"),
    parents={"x2": (("x1", 1.0),), "x3": (("x2", 1.0),), "y": (("x3", 1.0),)},
    noise_sd={v: 1.0 for v in ("x1", "x2", "x3", "y")},
)

COLLIDER_SCM = Scm(
    variables=("x1", "x3", "x2", "y", "x4", "x5"),
    parents={
        "x2": (("x1", 1.0),),
        "y": (("x1", 1.0), ("x2", 1.0)),
        "x4": (("y", 1.0), ("x3", 1.0)),
        "x5": (("y", 1.0),),
    },
    noise_sd={v: 1.0 for v in ("x1", "x2", "x3", "x4", "x5", "y")},
    feature_order=("x1", "x2", "x3", "x4", "x5"),
)

SCMS = {"chain_scm": CHAIN_SCM, "collider_scm": COLLIDER_SCM}


def get_scm(scm_id: str) -> Scm:
    try:
        return SCMS[scm_id]
    except KeyError:
        raise ValueError(f"unknown SCM {scm_id!r}") from None


# ---------------------------------------------------------------------------
# registered simulation processes


def _noise_sampler(n, rng):
    X = rng.uniform(0.0, 1.0, size=(n, 20))
    y = rng.uniform(0.0, 1.0, size=n)
    return Dataset.from_arrays(X, y)


def _interaction_mean(X):
    return X[:, 0] ** 2 + X[:, 1] - 5.0 * X[:, 0] * X[:, 1]


def _interaction_sampler(n, rng):
    X = rng.uniform(-1.0, 1.0, size=(n, 3))
    y = _interaction_mean(X) + rng.normal(0.0, np.sqrt(5.0), size=n)
    return Dataset.from_arrays(X, y)


def _masked_mean(X):
    return 3.0 * X[:, 0] - 6.0 * X[:, 1] + 12.0 * X[:, 1] * (X[:, 2] >= 0.0)


def _masked_sampler(n, rng):
    X = rng.uniform(-1.0, 1.0, size=(n, 3))
    y = _masked_mean(X) + rng.normal(0.0, np.sqrt(0.3), size=n)
    return Dataset.from_arrays(X, y)


def _flat_mean(X):
    return X[:, 1:10].sum(axis=1)


def _flat_sampler(n, rng):
    X = rng.uniform(0.0, 1.0, size=(n, 10))
    y = _flat_mean(X) + rng.normal(0.0, np.sqrt(0.9), size=n)
    return Dataset.from_arrays(X, y)


def _mcp_mean(X):
    return 2.0 * X[:, 0] + 2.0 * X[:, 1] ** 2


def _mcp_sampler(p):
    def sampler(n, rng):
        X = rng.normal(0.0, 1.0, size=(n, p))
        y = _mcp_mean(X) + rng.normal(0.0, 1.0, size=n)
        return Dataset.from_arrays(X, y)

    return sampler


def _ring_sampler(n, rng):
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r = rng.normal(1.0, 0.1, size=n)
    X = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Dataset.from_arrays(X, rng.normal(size=n))


def _make_registry():
    reg = {}
    reg["fig2_noise"] = DgpSpec(
        "fig2_noise",
        20,
        _noise_sampler,
        mean=lambda X: np.full(X.shape[0], 0.5),
        noise_variance=1.0 / 12.0,
        relevant=(False,) * 20,
    )
    reg["fig3_interaction"] = DgpSpec(
        "fig3_interaction",
        3,
        _interaction_sampler,
        mean=_interaction_mean,
        noise_variance=5.0,
        relevant=(True, True, False),
        interacting_pairs=((0, 1),),
    )
    reg["fig5_masked"] = DgpSpec(
        "fig5_masked",
        3,
        _masked_sampler,
        mean=_masked_mean,
        noise_variance=0.3,
        relevant=(True, True, True),
        interacting_pairs=((1, 2),),
    )
    reg["fig6_flat"] = DgpSpec(
        "fig6_flat",
        10,
        _flat_sampler,
        mean=_flat_mean,
        noise_variance=0.9,
        relevant=(False,) + (True,) * 9,
    )
    reg["ring_dependence"] = DgpSpec(
        "ring_dependence",
        2,
        _ring_sampler,
        mean=lambda X: np.zeros(X.shape[0]),
        noise_variance=1.0,
        relevant=(False, False),
    )
    return reg


_REGISTRY = _make_registry()


def get_dgp(dgp_id: str, p: int | None = None) -> DgpSpec:
    """Look up a DGP; `fig8_mcp` takes the total feature count `p`."""
    if dgp_id == "fig8_mcp":
        p = 10 if p is None else int(p)
        if p < 2:
            raise ValueError("fig8_mcp needs p >= 2")
        return DgpSpec(
            "fig8_mcp",
            p,
            _mcp_sampler(p),
            mean=_mcp_mean,
            noise_variance=1.0,
            relevant=(True, True) + (False,) * (p - 2),
        )
    try:
        return _REGISTRY[dgp_id]
    except KeyError:
        raise ValueError(f"unknown DGP {dgp_id!r}") from None


def list_dgps() -> list[str]:
    return sorted(_REGISTRY) + ["fig8_mcp"]


def sample(spec: DgpSpec | str, n: int, seed: int, p: int | None = None) -> Dataset:
    """Draw n i.i.d. rows from a registered process, deterministically."""
    if isinstance(spec, str):
        spec = get_dgp(spec, p=p)
    if n < 1:
        raise ValueError("n must be >= 1")
    return spec.sampler(n, rng_from_seed(seed))
