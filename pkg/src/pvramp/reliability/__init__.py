"""Weather-to-interruption regressions and the interruption-count forecaster."""

from .regression import RegressionKind, RegressionModel, fit_cubic, fit_two_term_exp
from .mlp import (
    FEATURE_NAMES,
    FeatureSet,
    MlpModel,
    Normalization,
    TrainConfig,
    TrainMetrics,
    build_features,
    gradient_check,
    mlp_forward,
    mlp_train,
    model_from_json,
    model_to_json,
    sensitivity,
)

__all__ = [
    "FEATURE_NAMES",
    "FeatureSet",
    "MlpModel",
    "Normalization",
    "RegressionKind",
    "RegressionModel",
    "TrainConfig",
    "TrainMetrics",
    "build_features",
    "fit_cubic",
    "fit_two_term_exp",
    "gradient_check",
    "mlp_forward",
    "mlp_train",
    "model_from_json",
    "model_to_json",
    "sensitivity",
]
