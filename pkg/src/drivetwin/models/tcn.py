"""Temporal convolutional regressor: stacked causal dilated 1-D convolutions and a linear head.

Each layer left-pads its input with copies of the first frame, so the output
at step t depends only on inputs at steps <= t. The receptive field is
``1 + sum((k - 1) * d)`` over the layers.
"""

from __future__ import annotations

import time
import warnings
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
class TcnModel:
    kernels: list  # kernels[l] has shape (k, c_in, c_out)
    biases: list
    dilations: tuple
    head_w: np.ndarray  # (c_last,)
    head_b: np.ndarray  # (1,)
    activation: str = "relu"
    kind: str = field(default="tcn", init=False)

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        get_activation(self.activation)
        if not (len(self.kernels) == len(self.biases) == len(self.dilations)) or not self.kernels:
            raise ConfigError("kernels, biases and dilations must have equal non-zero length")
        c = self.kernels[0].shape[1]
        for l, (K, b) in enumerate(zip(self.kernels, self.biases)):
            if K.ndim != 3 or K.shape[1] != c or b.shape != (K.shape[2],):
                raise ConfigError(f"conv layer {l} shapes do not chain")
            if self.dilations[l] < 1:
                raise ConfigError("dilations must be >= 1")
            c = K.shape[2]
        if self.head_w.shape != (c,) or self.head_b.shape != (1,):
            raise ConfigError("head shape does not match the last conv layer")

    @property
    def n_features(self) -> int:
        return self.kernels[0].shape[1]

    @property
    def receptive_field(self) -> int:
        return 1 + sum((K.shape[0] - 1) * d for K, d in zip(self.kernels, self.dilations))

    @property
    def parameter_count(self) -> int:
        return sum(K.size + b.size for K, b in zip(self.kernels, self.biases)) + self.head_w.size + 1

    def parameters(self) -> list:
        out = []
        for K, b in zip(self.kernels, self.biases):
            out += [K, b]
        return out + [self.head_w, self.head_b]

    def _forward(self, X):
        """X has shape (batch, time, channels); returns cache and (batch, time) output."""
        act, _ = get_activation(self.activation)
        h = X
        cache = []
        T = X.shape[1]
        for K, b, d in zip(self.kernels, self.biases, self.dilations):
            pad = (K.shape[0] - 1) * d
            P = np.concatenate([np.repeat(h[:, :1], pad, axis=1), h], axis=1) if pad else h
            z = b + sum(P[:, j * d : j * d + T] @ K[j] for j in range(K.shape[0]))
            h = act(z)
            cache.append((P, z, h))
        return cache, h @ self.head_w + self.head_b[0]

    def predict(self, X) -> np.ndarray:
        """Predict one time-ordered sequence of shape (time, channels)."""
        X = check_width(self.n_features, X)
        return self._forward(X[None])[1][0]

    def loss_and_gradients(self, X, y, mask=None) -> tuple[float, list]:
        """Masked MSE over a (batch, time, channels) window stack and its parameter gradients."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X, y = X[None], np.asarray(y)[None]
            mask = None if mask is None else np.asarray(mask)[None]
        _, dact = get_activation(self.activation)
        cache, out = self._forward(X)
        if mask is None:
            mask = np.ones_like(out)
        count = mask.sum()
        err = (out - y) * mask
        loss = float(np.sum(err * err) / count)
        dout = (2.0 / count) * err

        h_last = cache[-1][2]
        grads = [None] * (2 * len(self.kernels))
        g_head_w = np.einsum("bt,btc->c", dout, h_last)
        g_head_b = np.array([dout.sum()])
        dh = dout[..., None] * self.head_w
        T = X.shape[1]
        for l in range(len(self.kernels) - 1, -1, -1):
            K, d = self.kernels[l], self.dilations[l]
            P, z, h = cache[l]
            dz = dh * dact(z, h)
            c_in, c_out = K.shape[1], K.shape[2]
            dz2 = dz.reshape(-1, c_out)
            gK = np.empty_like(K)
            dP = np.zeros_like(P)
            for j in range(K.shape[0]):
                sl = P[:, j * d : j * d + T]
                gK[j] = sl.reshape(-1, c_in).T @ dz2
                dP[:, j * d : j * d + T] += dz @ K[j].T
            grads[2 * l] = gK
            grads[2 * l + 1] = dz2.sum(axis=0)
            pad = (K.shape[0] - 1) * d
            dh = dP[:, pad:].copy()
            if pad:
                dh[:, 0] += dP[:, :pad].sum(axis=1)
        return loss, grads + [g_head_w, g_head_b]

    def architecture(self) -> dict:
        return {
            "channels": [int(K.shape[2]) for K in self.kernels],
            "kernel_sizes": [int(K.shape[0]) for K in self.kernels],
            "dilations": list(self.dilations),
            "n_features": self.n_features,
            "activation": self.activation,
        }

    def parameters_dict(self) -> dict:
        return {
            "kernels": [K.tolist() for K in self.kernels],
            "biases": [b.tolist() for b in self.biases],
            "head_w": self.head_w.tolist(),
            "head_b": self.head_b.tolist(),
        }

    @classmethod
    def from_parts(cls, arch: dict, params: dict, column_names=()) -> "TcnModel":
        return cls(
            kernels=[np.asarray(K, dtype=float) for K in params["kernels"]],
            biases=[np.asarray(b, dtype=float) for b in params["biases"]],
            dilations=tuple(arch["dilations"]),
            head_w=np.asarray(params["head_w"], dtype=float),
            head_b=np.asarray(params["head_b"], dtype=float),
            activation=arch["activation"],
        )


def layer_plan(kernel: int = 3, dilations=(1, 2, 4), stacks: int = 2, channels: int = 16) -> list[tuple]:
    """(kernel, dilation, channels) per conv layer for ``stacks`` repeats of ``dilations``."""
    if kernel < 1 or stacks < 1 or channels < 1 or not dilations:
        raise ConfigError("kernel, stacks, channels must be >= 1 and dilations non-empty")
    return [(int(kernel), int(d), int(channels)) for _ in range(stacks) for d in dilations]


def init_tcn(n_features: int, plan, activation: str = "relu", seed: int = 0, output_bias: float = 0.0) -> TcnModel:
    rng = np.random.default_rng(seed)
    kernels, biases, dilations = [], [], []
    c_in = n_features
    for k, d, c_out in plan:
        fan_in = k * c_in
        kernels.append(uniform_init(rng, fan_in, (k, c_in, c_out), activation))
        biases.append(np.zeros(c_out))
        dilations.append(d)
        c_in = c_out
    head_w = uniform_init(rng, c_in, (c_in,))
    return TcnModel(kernels, biases, tuple(dilations), head_w, np.array([output_bias]), activation)


def _windows(seqs, context: int, length: int):
    """Fixed-length training windows with ``context`` frames of history.

    Sequences are pre-padded with their first frame, which reproduces the
    per-layer replicate padding exactly, so loss positions see the same
    values as a full-sequence forward pass.
    """
    xs = []
    for X, y in seqs:
        T = len(y)
        L = min(length, T)
        Xp = np.concatenate([np.repeat(X[:1], context, axis=0), X]) if context else X
        starts = list(range(0, T - L + 1, L))
        if starts[-1] != T - L:
            starts.append(T - L)
        for s in starts:
            xs.append((Xp[s : s + context + L], y[s : s + L]))
    return xs


def fit_tcn(
    data,
    y=None,
    kernel: int = 3,
    dilations=(1, 2, 4),
    stacks: int = 2,
    channels: int = 16,
    activation: str = "relu",
    lr: float = 1e-3,
    batch: int = 8,
    epochs: int = 200,
    window: int = 128,
    momentum: float = 0.9,
    seed: int = 0,
) -> tuple[TcnModel, TrainReport]:
    """Train on one or more time-ordered sequences; windows never cross sequence boundaries.

    ``batch`` counts windows of ``window`` loss steps per optimizer step. As
    for the MLP, the standardized target is folded back into the head.
    """
    seqs = as_sequences(data if y is None else (data, y))
    for X, yy in seqs:
        check_finite(X, yy)
    n_features = seqs[0][0].shape[1]
    if any(X.shape[1] != n_features for X, _ in seqs):
        raise ConfigError("all sequences must have the same feature width")
    if batch < 1 or epochs < 0 or window < 1:
        raise ConfigError("batch and window must be >= 1, epochs >= 0")

    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    plan = layer_plan(kernel, dilations, stacks, channels)
    y_mean, y_scale = target_scaling(np.concatenate([s[1] for s in seqs]))
    train_seqs = [(X, (yy - y_mean) / y_scale) for X, yy in seqs]
    model = init_tcn(n_features, plan, activation, seed=int(rng.integers(2**31)))
    context = model.receptive_field - 1
    if any(len(s[1]) < model.receptive_field for s in seqs):
        warnings.warn("a training sequence is shorter than the receptive field; padding covers it", stacklevel=2)

    # group windows by length so each batch stacks into one array
    by_len: dict[int, list] = {}
    for wx, wy in _windows(train_seqs, context, window):
        by_len.setdefault(len(wy), []).append((wx, wy))
    groups = [(np.stack([w[0] for w in ws]), np.stack([w[1] for w in ws])) for _, ws in sorted(by_len.items())]
    n_windows = sum(len(g[1]) for g in groups)

    opt = SgdMomentum(model.parameters(), lr=lr, momentum=momentum)
    history = []
    for _ in range(epochs):
        batches = []
        for gi, (gx, _) in enumerate(groups):
            order = rng.permutation(len(gx))
            batches += [(gi, order[s : s + batch]) for s in range(0, len(order), batch)]
        total = 0.0
        for bi in rng.permutation(len(batches)):
            gi, idx = batches[bi]
            gx, gy = groups[gi]
            xb = gx[idx]
            mask = np.zeros((len(idx), xb.shape[1]))
            mask[:, context:] = 1.0
            yb = np.zeros_like(mask)
            yb[:, context:] = gy[idx]
            loss, grads = model.loss_and_gradients(xb, yb, mask)
            opt.step(grads)
            total += loss * len(idx)
        history.append(total / n_windows * y_scale**2)
    model.head_w *= y_scale
    model.head_b *= y_scale
    model.head_b += y_mean
    elapsed = time.perf_counter() - start
    final = float(np.mean(np.concatenate([(model.predict(X) - yy) ** 2 for X, yy in seqs])))
    return model, TrainReport(final, epochs, elapsed, model.parameter_count, history)
