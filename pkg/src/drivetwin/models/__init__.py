"""Regressors behind a common predictor contract.

Every model exposes ``kind``, ``n_features``, ``parameter_count``,
``predict(X)``, ``architecture()`` and ``parameters_dict()``.
"""

from __future__ import annotations

import inspect

import numpy as np

from ..errors import ConfigError
from .base import TrainReport, check_width
from .elastic_net import ElasticNetModel, fit_elastic_net
from .mlp import MlpModel, fit_mlp
from .tcn import TcnModel, fit_tcn

MODEL_KINDS = {
    "elastic_net": (ElasticNetModel, fit_elastic_net),
    "mlp": (MlpModel, fit_mlp),
    "tcn": (TcnModel, fit_tcn),
}

SEQUENCE_KINDS = {"tcn"}


def hyperparameter_names(kind: str) -> set:
    _, fit = _lookup(kind)
    return {n for n in inspect.signature(fit).parameters if n not in ("data", "y", "seed", "column_names")}


def _lookup(kind: str):
    try:
        return MODEL_KINDS[kind]
    except KeyError:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}") from None


def fit_model(kind: str, data, params: dict | None = None, seed: int = 0):
    """Fit ``kind`` on ``data`` = [(X, y), ...] (one entry per profile). Returns (model, report)."""
    _, fit = _lookup(kind)
    params = dict(params or {})
    unknown = set(params) - hyperparameter_names(kind)
    if unknown:
        raise ConfigError(f"unknown {kind} hyperparameters: {sorted(unknown)}")
    if kind == "mlp" and "layers" in params:
        params["layers"] = tuple(params["layers"])
    return fit(data, seed=seed, **params)


def predict(model, X) -> np.ndarray:
    """Predictions for one feature matrix (for sequence models: one time-ordered profile)."""
    return model.predict(check_width(model.n_features, X))


def model_from_parts(kind: str, architecture: dict, parameters: dict, column_names=()):
    cls, _ = _lookup(kind)
    return cls.from_parts(architecture, parameters, column_names)


__all__ = [
    "ElasticNetModel",
    "MlpModel",
    "TcnModel",
    "TrainReport",
    "MODEL_KINDS",
    "SEQUENCE_KINDS",
    "fit_elastic_net",
    "fit_mlp",
    "fit_tcn",
    "fit_model",
    "predict",
    "model_from_parts",
    "hyperparameter_names",
]
