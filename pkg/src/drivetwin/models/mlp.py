"""Fully connected regressor trained with mini-batch momentum SGD and hand-derived backprop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .base import (
    SgdMomentum,
    TrainReport,
    as_sequences,
    check_finite,
    check_width,
    get_activation,
    target_scaling,
    uniform_init,
)


@dataclass(eq=False)
class MlpModel:
    layers: tuple
    weights: list  # weights[l] has shape (layers[l], layers[l+1])
    biases: list
    activation: str = "relu"
    kind: str = field(default="mlp", init=False)

    def __post_init__(self):
        self.layers = tuple(int(n) for n in self.layers)
        validate_layers(self.layers)
        get_activation(self.activation)
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.layers[l], self.layers[l + 1]) or b.shape != (self.layers[l + 1],):
                raise ConfigError(f"layer {l} parameter shapes do not chain with {self.layers}")

    @property
    def n_features(self) -> int:
        return self.layers[0]

    @property
    def parameter_count(self) -> int:
        return sum(a * b + b for a, b in zip(self.layers[:-1], self.layers[1:]))

    def parameters(self) -> list:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def _forward(self, X):
        act, _ = get_activation(self.activation)
        zs, acts = [], [X]
        a = X
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if l == last else act(z)
            zs.append(z)
            acts.append(a)
        return zs, acts

    def predict(self, X) -> np.ndarray:
        X = check_width(self.n_features, X)
        return self._forward(X)[1][-1][:, 0]

    def loss_and_gradients(self, X, y) -> tuple[float, list]:
        """MSE loss and its gradient for every array in :meth:`parameters`."""
        _, dact = get_activation(self.activation)
        zs, acts = self._forward(X)
        err = acts[-1][:, 0] - y
        n = len(y)
        loss = float(np.mean(err * err))
        delta = (2.0 / n) * err[:, None]
        grads = [None] * (2 * len(self.weights))
        for l in range(len(self.weights) - 1, -1, -1):
            grads[2 * l] = acts[l].T @ delta
            grads[2 * l + 1] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ self.weights[l].T) * dact(zs[l - 1], acts[l])
        return loss, grads

    def architecture(self) -> dict:
        return {"layers": list(self.layers), "activation": self.activation}

    def parameters_dict(self) -> dict:
        return {"weights": [W.tolist() for W in self.weights], "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_parts(cls, arch: dict, params: dict, column_names=()) -> "MlpModel":
        return cls(
            layers=tuple(arch["layers"]),
            weights=[np.asarray(W, dtype=float).reshape(len(W), -1) for W in params["weights"]],
            biases=[np.asarray(b, dtype=float) for b in params["biases"]],
            activation=arch["activation"],
        )


def validate_layers(layers) -> None:
    if len(layers) < 2:
        raise ConfigError("an MLP needs at least input and output layer sizes")
    if any(n < 1 for n in layers):
        raise ConfigError(f"layer sizes must be positive, got {list(layers)}")
    if layers[-1] != 1:
        raise ConfigError("the output layer must have exactly one unit")


def init_mlp(layers, activation_name: str = "relu", seed: int = 0, output_bias: float = 0.0) -> MlpModel:
    layers = tuple(int(n) for n in layers)
    validate_layers(layers)
    rng = np.random.default_rng(seed)
    pairs = list(zip(layers[:-1], layers[1:]))
    # the last layer feeds no activation
    acts = [activation_name] * (len(pairs) - 1) + ["identity"]
    weights = [uniform_init(rng, a, (a, b), g) for (a, b), g in zip(pairs, acts)]
    biases = [uniform_init(rng, a, (b,), g) for (a, b), g in zip(pairs, acts)]
    biases[-1][:] = output_bias
    return MlpModel(layers, weights, biases, activation_name)


def fit_mlp(
    data,
    y=None,
    layers=None,
    hidden=(64, 64),
    activation: str = "relu",
    lr: float = 1e-3,
    batch: int = 64,
    epochs: int = 200,
    momentum: float = 0.9,
    seed: int = 0,
) -> tuple[MlpModel, TrainReport]:
    """Train on MSE with seeded init and per-epoch seeded shuffling.

    Give either full ``layers`` (input, hidden..., 1) or just ``hidden`` sizes.
    Training runs on the standardized target; the mean and scale are folded
    into the output layer afterwards, so the returned model predicts degC.
    """
    seqs = as_sequences(data if y is None else (data, y))
    X = np.vstack([s[0] for s in seqs])
    y = np.concatenate([s[1] for s in seqs])
    check_finite(X, y)
    if layers is None:
        layers = (X.shape[1], *hidden, 1)
    layers = tuple(layers)
    validate_layers(layers)
    if layers[0] != X.shape[1]:
        raise ConfigError(f"input layer has {layers[0]} units but data has {X.shape[1]} columns")
    if batch < 1 or epochs < 0:
        raise ConfigError("batch must be >= 1 and epochs >= 0")

    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    y_mean, y_scale = target_scaling(y)
    yn = (y - y_mean) / y_scale
    model = init_mlp(layers, activation, seed=int(rng.integers(2**31)))
    opt = SgdMomentum(model.parameters(), lr=lr, momentum=momentum)
    n = len(y)
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, batch):
            idx = order[s : s + batch]
            loss, grads = model.loss_and_gradients(X[idx], yn[idx])
            opt.step(grads)
            total += loss * len(idx)
        history.append(total / n * y_scale**2)
    model.weights[-1] *= y_scale
    model.biases[-1] *= y_scale
    model.biases[-1] += y_mean
    elapsed = time.perf_counter() - start
    final = float(np.mean((model.predict(X) - y) ** 2))
    return model, TrainReport(final, epochs, elapsed, model.parameter_count, history)
