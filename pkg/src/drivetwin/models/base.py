"""Pieces shared by the regressors: train report, activations, optimizer, shape checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError


@dataclass
class TrainReport:
    final_loss: float
    iterations: int
    train_seconds: float
    parameter_count: int
    history: list = field(default_factory=list)  # per sweep/epoch loss

    def to_dict(self) -> dict:
        return {
            "final_loss": float(self.final_loss),
            "iterations": int(self.iterations),
            "train_seconds": round(float(self.train_seconds), 3),
            "parameter_count": int(self.parameter_count),
        }


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(z.dtype)


def _tanh_grad(z, a):
    return 1.0 - a * a


def _identity_grad(z, a):
    return np.ones_like(z)


# name -> (forward, derivative given (pre-activation, activation))
ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
    "identity": (lambda z: z, _identity_grad),
}


def get_activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ConfigError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


class SgdMomentum:
    """Heavy-ball SGD: v <- mu*v - lr*g; p <- p + v (parameters updated in place)."""

    def __init__(self, params: list, lr: float = 1e-3, momentum: float = 0.9):
        if lr <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0 <= momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads: list) -> None:
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= self.momentum
            v -= self.lr * g
            p += v


# variance-preserving gains for the U(-g/sqrt(fan_in), g/sqrt(fan_in)) init
INIT_GAIN = {"relu": np.sqrt(6.0), "tanh": np.sqrt(3.0), "identity": np.sqrt(3.0)}


def uniform_init(rng: np.random.Generator, fan_in: int, shape, activation: str = "identity") -> np.ndarray:
    bound = INIT_GAIN[activation] / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def target_scaling(y: np.ndarray) -> tuple[float, float]:
    """Mean and scale used to train on a standardized target."""
    scale = float(np.std(y))
    return float(np.mean(y)), scale if scale > 0 else 1.0


def check_finite(X: np.ndarray, y: np.ndarray | None = None) -> None:
    if X.shape[0] == 0:
        raise ValueError("training data has zero rows")
    if not np.all(np.isfinite(X)) or (y is not None and not np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")


def check_width(expected: int, X: np.ndarray) -> np.ndarray:
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D feature array, got shape {X.shape}")
    if X.shape[1] != expected:
        raise ShapeError(f"feature width mismatch: model expects {expected} columns, got {X.shape[1]}")
    return X


def as_sequences(data) -> list[tuple[np.ndarray, np.ndarray]]:
    """Normalize (X, y) or [(X, y), ...] into a list of float arrays."""
    if isinstance(data, tuple) and len(data) == 2 and not isinstance(data[0], tuple):
        data = [data]
    out = []
    for X, y in data:
        X = np.asarray(getattr(X, "values", X), dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ShapeError(f"X rows ({X.shape[0] if X.ndim else 0}) must equal y length ({y.shape[0]})")
        out.append((X, y))
    if not out:
        raise ValueError("no training data")
    return out
