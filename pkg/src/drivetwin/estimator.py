"""Self-contained inference pipeline (features + scaler + model) and its file format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelFormatError
from .fileio import atomic_write_text
from .features import DEFAULT_EWMA_SPECS, EwmaSpec, FeatureMatrix, expand_features, specs_from_config
from .models import SEQUENCE_KINDS, fit_model, model_from_parts
from .models.base import TrainReport
from .telemetry import INPUT_SIGNALS, Profile, ScalerState, apply_scaler, fit_scaler

FORMAT_NAME = "drivetwin-model"
FORMAT_VERSION = 1


@dataclass(eq=False)
class TemperatureEstimator:
    """Case-temperature estimator that runs from raw drive telemetry."""

    model: object
    scaler: ScalerState
    ewma_specs: tuple
    dt: float = 1.0
    seed: int = 0

    @property
    def kind(self) -> str:
        return self.model.kind

    @property
    def is_sequence_model(self) -> bool:
        return self.kind in SEQUENCE_KINDS

    @property
    def feature_names(self) -> list[str]:
        return list(INPUT_SIGNALS) + [s.name for s in self.ewma_specs]

    def features(self, profile: Profile) -> FeatureMatrix:
        """Expanded and scaled features of ``profile``."""
        return apply_scaler(self.scaler, expand_features(profile, self.ewma_specs))

    def predict_features(self, X) -> np.ndarray:
        """Predict from already expanded and scaled features."""
        return self.model.predict(X)

    def predict_profile(self, profile: Profile) -> np.ndarray:
        return self.model.predict(self.features(profile))


def train_estimator(
    profiles: Sequence[Profile],
    kind: str,
    params: dict | None = None,
    ewma_specs=None,
    seed: int = 0,
) -> tuple[TemperatureEstimator, TrainReport]:
    """Fit scaler and model on ``profiles`` only."""
    specs = DEFAULT_EWMA_SPECS if ewma_specs is None else specs_from_config(ewma_specs)
    feats = [expand_features(p, specs) for p in profiles]
    scaler = fit_scaler(feats)
    data = [(apply_scaler(scaler, f).values, p.signal("T_C")) for f, p in zip(feats, profiles)]
    model, report = fit_model(kind, data, params, seed=seed)
    return TemperatureEstimator(model, scaler, tuple(specs), float(profiles[0].nominal_dt), seed), report


def estimator_to_dict(est: TemperatureEstimator) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": est.kind,
        "n_features": int(est.model.n_features),
        "architecture": est.model.architecture(),
        "parameters": est.model.parameters_dict(),
        "scaler": est.scaler.to_dict(),
        "features": {"ewma": [s.to_dict() for s in est.ewma_specs], "columns": est.feature_names},
        "dt": est.dt,
        "training_seed": est.seed,
    }


def estimator_from_dict(d: dict) -> TemperatureEstimator:
    if d.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"not a {FORMAT_NAME} file")
    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {d.get('version')!r}, expected {FORMAT_VERSION}")
    try:
        specs = tuple(EwmaSpec(s["source"], float(s["span"])) for s in d["features"]["ewma"])
        scaler = ScalerState.from_dict(d["scaler"])
        model = model_from_parts(d["kind"], d["architecture"], d["parameters"], d["features"]["columns"])
        n = int(d["n_features"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    widths = {
        "declared n_features": n,
        "model input": model.n_features,
        "scaler": scaler.width,
        "feature spec": len(INPUT_SIGNALS) + len(specs),
    }
    if len(set(widths.values())) != 1:
        raise ModelFormatError(f"feature count mismatch in model file: {widths}")
    return TemperatureEstimator(model, scaler, specs, float(d["dt"]), int(d.get("training_seed", 0)))


def save_model(est: TemperatureEstimator, path) -> None:
    atomic_write_text(path, json.dumps(estimator_to_dict(est), indent=1) + "\n")


def load_model(path) -> TemperatureEstimator:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    return estimator_from_dict(d)


__all__ = [
    "TemperatureEstimator",
    "train_estimator",
    "save_model",
    "load_model",
    "estimator_to_dict",
    "estimator_from_dict",
]
