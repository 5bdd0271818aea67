"""Learned pseudo-label refinement offsets and per-class confidence thresholds
for class-imbalanced semi-supervised learning."""

from .curriculum import (
    CurriculumConfig,
    CurriculumState,
    SEVALParameterEstimator,
    ema_update,
    estimate_step,
    partition,
    step_index,
)
from .metrics import (
    Case,
    OracleUnlabeled,
    balanced_accuracy,
    case_taxonomy,
    classwise_pr,
    correctness,
    cumulative_gain,
    estimated_precision,
    gain,
)
from .offsets import LogitOffsetAdjuster, OffsetFitConfig, apply_offsets, fit_offsets, gauge_fix, la_offsets
from .pseudo import PseudoBatch, make_pseudo_batch, pseudo_label, select_mask, unlabeled_risk
from .synthdata import SynthSpec, class_counts, generate
from .thresholds import (
    ClassThresholdSelector,
    ThresholdFitConfig,
    ThresholdFitReport,
    fit_thresholds,
    inverse_frequency_weights,
    selected_accuracy,
)

__version__ = "0.1.0"

__all__ = [
    "CurriculumConfig", "CurriculumState", "SEVALParameterEstimator", "ema_update", "estimate_step",
    "partition", "step_index",
    "Case", "OracleUnlabeled", "balanced_accuracy", "case_taxonomy", "classwise_pr", "correctness",
    "cumulative_gain", "estimated_precision", "gain",
    "LogitOffsetAdjuster", "OffsetFitConfig", "apply_offsets", "fit_offsets", "gauge_fix", "la_offsets",
    "PseudoBatch", "make_pseudo_batch", "pseudo_label", "select_mask", "unlabeled_risk",
    "SynthSpec", "class_counts", "generate",
    "ClassThresholdSelector", "ThresholdFitConfig", "ThresholdFitReport", "fit_thresholds",
    "inverse_frequency_weights", "selected_accuracy",
]
