"""Online conformal prediction with nested multi-level thresholds."""

from .core import (
    CoverageGrid,
    GapWeights,
    QuantileState,
    StepRecord,
    Trajectory,
    gaps_from_quantiles,
    miscoverage,
    prediction_interval,
    quantiles_from_gaps,
)
from .errors import (
    ConfigError,
    ConfigParseError,
    DataIntegrityError,
    InvalidInputError,
    NestedConformalError,
    UnsupportedMetricError,
)
from .estimators import METHODS, EstimatorConfig, OnlineEstimator, init, run_estimator, step
from .loss import gap_gradient, gap_jacobian, joint_gradient, joint_loss, pinball_loss, pinball_subgradient
from .metrics import (
    RunMetrics,
    calibration_error,
    compute_run_metrics,
    l1_tracking_error,
    nestedness_gaps,
    regret_and_bounds,
    set_size,
)
from .projection import isotonic_decreasing, kl_project_truncated_simplex, pava_project_decreasing
from .synthetic import WalkConfig, generate_walk, reflect, true_quantiles

__all__ = [
    "METHODS",
    "ConfigError",
    "ConfigParseError",
    "CoverageGrid",
    "DataIntegrityError",
    "EstimatorConfig",
    "GapWeights",
    "InvalidInputError",
    "NestedConformalError",
    "OnlineEstimator",
    "QuantileState",
    "RunMetrics",
    "StepRecord",
    "Trajectory",
    "UnsupportedMetricError",
    "WalkConfig",
    "calibration_error",
    "compute_run_metrics",
    "gap_gradient",
    "gap_jacobian",
    "gaps_from_quantiles",
    "generate_walk",
    "init",
    "isotonic_decreasing",
    "joint_gradient",
    "joint_loss",
    "kl_project_truncated_simplex",
    "l1_tracking_error",
    "miscoverage",
    "nestedness_gaps",
    "pava_project_decreasing",
    "pinball_loss",
    "pinball_subgradient",
    "prediction_interval",
    "quantiles_from_gaps",
    "reflect",
    "regret_and_bounds",
    "run_estimator",
    "set_size",
    "step",
    "true_quantiles",
]
