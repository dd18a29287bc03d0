"""Pitfall audit: structured warnings for a planned interpretation run.

Each check recomputes a metric from the public operations of the other
modules and compares it against a documented, overridable threshold. A
finding never blocks execution; it travels with every CLI report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field


from .core import Dataset, SQUARED_ERROR, evaluate
from .dependence import extrapolation_score, hsic, independence_test, pearson, perturbation_points
from .interactions import h_pairwise
from .learners import LearnerSpec, FittedModel, fit

PITFALLS = (
    "P1_one_fits_all", "P2_generalization", "P3_unnecessary_complexity",
    "P4_extrapolation", "P5_nonlinear_dependence", "P6_conditional_semantics",
    "P7_masked_interaction", "P8_uncertainty_ignored", "P9_high_dim",
    "P10_mcp", "P11_causal",
)

DEFAULT_THRESHOLDS = {
    "P2_loss_ratio": 2.0,
    "P3_relative_tolerance": 0.05,
    "P4_score": 0.3,
    "P5_hsic_alpha": 0.05,
    "P5_pearson_cut": 0.2,
    "P7_h_squared": 0.25,
    "P8_min_replicates": 10,
    "P9_max_features": 50,
}


@dataclass(frozen=True)
class AuditFinding:
    pitfall_id: str
    severity: str  # "info" | "warn" | "fail"
    metric: str
    value: float
    threshold: float
    message: str


@dataclass
class AuditPlan:
    """What the user intends to run, as far as the audit needs to know."""

    method: str  # e.g. "pdp", "pfi", "pimp", ...
    feature_indices: list[int] = field(default_factory=list)
    grid_strategy: str = "quantile"
    grid_size: int = 20
    n_replicates: int = 1
    mcp_correction: str | None = None


def findings_to_json(findings: list[AuditFinding], path=None) -> str:
    payload = json.dumps([asdict(f) for f in findings], indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(payload)
    return payload


ONE_D_AGGREGATES = {"pdp", "ale", "mplot", "pfi", "cfi"}


def audit(train: Dataset, model: FittedModel, plan: AuditPlan,
          test: Dataset | None = None, seed: int = 0,
          thresholds: dict | None = None) -> list[AuditFinding]:
    """Run every applicable pitfall check for a planned interpretation."""
    th = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    out: list[AuditFinding] = []
    features = plan.feature_indices or list(range(train.p))

    # P2: generalization gap / in-sample evaluation
    train_loss = evaluate(model, train, SQUARED_ERROR)
    if test is None:
        out.append(AuditFinding(
            "P2_generalization", "fail", "test_train_loss_ratio", float("nan"),
            th["P2_loss_ratio"],
            "no held-out split declared; in-sample evaluation must not be used",
        ))
        test_loss = train_loss
    else:
        test_loss = evaluate(model, test, SQUARED_ERROR)
        ratio = test_loss / max(train_loss, 1e-12)
        if ratio > th["P2_loss_ratio"]:
            out.append(AuditFinding(
                "P2_generalization", "warn", "test_train_loss_ratio", ratio,
                th["P2_loss_ratio"],
                "model generalizes poorly; interpretations describe an over- "
                "or underfit model, not the data",
            ))

    # P3: would a linear model do
    if test is not None and model.spec.kind != "ols_linear":
        ols_loss = evaluate(fit(LearnerSpec("ols_linear"), train), test, SQUARED_ERROR)
        if ols_loss <= (1.0 + th["P3_relative_tolerance"]) * test_loss:
            out.append(AuditFinding(
                "P3_unnecessary_complexity", "warn", "ols_test_loss_ratio",
                ols_loss / max(test_loss, 1e-12), 1.0 + th["P3_relative_tolerance"],
                "an interpretable linear model matches this model's test loss",
            ))

    # P4: extrapolation of the planned perturbation
    if plan.method in ONE_D_AGGREGATES | {"ice", "pdp_2d", "shap"}:
        scores = []
        for j in features:
            pts = perturbation_points(train, j, plan.grid_strategy,
                                      min(plan.grid_size, max(2, train.n - 1)), seed)
            scores.append(extrapolation_score(train, pts, strategy=plan.grid_strategy).score)
        worst = float(max(scores))
        if worst > th["P4_score"]:
            out.append(AuditFinding(
                "P4_extrapolation", "fail", "extrapolation_score", worst,
                th["P4_score"],
                "perturbed points leave the joint data distribution; "
                "the model is evaluated where it never saw data",
            ))

    # P5: dependence a correlation screen would miss
    p5 = _nonlinear_dependence(train, th, seed)
    if p5 is not None:
        out.append(p5)

    # P7: interactions masked by a 1-D aggregate
    if plan.method in ONE_D_AGGREGATES and train.p >= 2:
        best = 0.0
        for j in features:
            for k in range(train.p):
                if k != j:
                    best = max(best, h_pairwise(model, train, j, k, seed=seed).h_squared)
        if best > th["P7_h_squared"]:
            out.append(AuditFinding(
                "P7_masked_interaction", "warn", "max_pairwise_h_squared", best,
                th["P7_h_squared"],
                "strong interactions present; a single aggregate curve or "
                "score hides heterogeneous effects",
            ))

    # P8: no replicates, no uncertainty statement
    if plan.n_replicates < th["P8_min_replicates"]:
        out.append(AuditFinding(
            "P8_uncertainty_ignored", "warn", "n_replicates",
            float(plan.n_replicates), float(th["P8_min_replicates"]),
            "too few replicates to quantify estimation uncertainty",
        ))

    # P9: high-dimensional output is not human-readable
    if train.p > th["P9_max_features"]:
        out.append(AuditFinding(
            "P9_high_dim", "info", "n_features", float(train.p),
            float(th["P9_max_features"]),
            "consider grouping or selecting features before interpreting",
        ))

    # P10: several tested features without correction
    if plan.method in {"pimp", "test"} and len(features) >= 2 and not plan.mcp_correction:
        out.append(AuditFinding(
            "P10_mcp", "warn", "n_uncorrected_tests", float(len(features)), 1.0,
            "testing several features without multiple-comparison correction",
        ))

    # P11: unconditional reminder
    out.append(AuditFinding(
        "P11_causal", "info", "n_features", float(train.p), float("inf"),
        "feature relevance for prediction does not indicate a causal role",
    ))
    return out


def _nonlinear_dependence(train: Dataset, th: dict, seed: int) -> AuditFinding | None:
    """Flag a feature pair that is dependent per HSIC but nearly uncorrelated."""
    n = min(train.n, 300)  # permutation test cost is quadratic in n
    X = train.features[:n]
    for a in range(train.p):
        for b in range(a + 1, train.p):
            x, y = X[:, a], X[:, b]
            if x.std() == 0 or y.std() == 0:
                continue
            if abs(pearson(x, y)) >= th["P5_pearson_cut"]:
                continue
            p_val = independence_test(x, y, "hsic", 199, seed)
            if p_val < th["P5_hsic_alpha"]:
                return AuditFinding(
                    "P5_nonlinear_dependence", "warn", "hsic_p_value", p_val,
                    th["P5_hsic_alpha"],
                    f"features {train.feature_names[a]!r} and "
                    f"{train.feature_names[b]!r} are dependent despite "
                    "near-zero linear correlation",
                )
    return None
