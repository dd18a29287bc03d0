"""Model-agnostic interpretability methods with built-in pitfall diagnostics."""

__version__ = "0.1.0"

from .core import (Dataset, Grid, Loss, Predictor, SQUARED_ERROR,
                   ABSOLUTE_ERROR, build_grid, evaluate, get_loss,
                   train_test_split)
from .learners import LearnerSpec, FittedModel, fit, oracle_predictor
from .effects import EffectCurve, Effect2D, ale, centered_ice, derivative_ice, ice, mplot, pdp, pdp_2d
from .importance import (ConditionalSampler, ImportanceResult,
                         ShapleyExplanation, cfi, fit_conditional_sampler,
                         grouped_pfi, pfi, sage, shap_importance,
                         shapley_exact, shapley_sampled)
from .interactions import InteractionResult, dice_screen, h_pairwise, h_total
from .dependence import (DependenceReport, ExtrapolationReport,
                         extrapolation_score, hsic, independence_test,
                         pearson, perturbation_points, spearman)
from .inference import (TestedImportance, UncertaintyBand, adjust_pvalues,
                        pdp_band_estimation, pdp_band_refit, pfi_ci, pimp)
from .diagnostics import AuditFinding, AuditPlan, audit
from .experiments import reproduce

__all__ = [name for name in dir() if not name.startswith("_")]
