"""Thermal digital twin for power-module case-temperature estimation and cooling-fault monitoring."""

from .errors import (
    ArtifactError,
    ConfigError,
    DriveTwinError,
    ModelFormatError,
    OrderingError,
    ParseError,
    SchemaError,
    ShapeError,
    StateError,
    ThresholdError,
)
from .estimator import TemperatureEstimator, load_model, save_model, train_estimator
from .evaluation import (
    MetricsReport,
    ModelConfig,
    compute_metrics,
    correlation_matrix,
    leave_one_profile_out,
    permutation_importance,
    random_search,
)
from .features import DEFAULT_EWMA_SPECS, EwmaSpec, FeatureMatrix, ewma, expand_features
from .monitor import AlertEvent, MonitorConfig, ResidualMonitor, calibrate_threshold, detect, stream_residuals
from .telemetry import Profile, TelemetrySample, fit_scaler, apply_scaler, read_profile_csv, regularize, write_profile_csv
from .testbench import (
    FaultSpec,
    PlantParams,
    ProfileSpec,
    RatedValues,
    Segment,
    generate_dataset,
    generate_profile,
    simulate_plant,
    template_spec,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "ConfigError",
    "DriveTwinError",
    "ModelFormatError",
    "OrderingError",
    "ParseError",
    "SchemaError",
    "ShapeError",
    "StateError",
    "ThresholdError",
    "MetricsReport",
    "ModelConfig",
    "compute_metrics",
    "correlation_matrix",
    "leave_one_profile_out",
    "permutation_importance",
    "random_search",
    "FaultSpec",
    "PlantParams",
    "ProfileSpec",
    "RatedValues",
    "Segment",
    "generate_dataset",
    "generate_profile",
    "simulate_plant",
    "template_spec",
    "TemperatureEstimator",
    "load_model",
    "save_model",
    "train_estimator",
    "DEFAULT_EWMA_SPECS",
    "EwmaSpec",
    "FeatureMatrix",
    "ewma",
    "expand_features",
    "AlertEvent",
    "MonitorConfig",
    "ResidualMonitor",
    "calibrate_threshold",
    "detect",
    "stream_residuals",
    "Profile",
    "TelemetrySample",
    "fit_scaler",
    "apply_scaler",
    "read_profile_csv",
    "regularize",
    "write_profile_csv",
]
