"""Design matrix construction: raw drive inputs plus exponentially weighted moving averages."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import SchemaError
from .telemetry import INPUT_SIGNALS, Profile


@dataclass(frozen=True)
class EwmaSpec:
    source: str
    span: float  # time constant in seconds

    def __post_init__(self):
        if self.source not in INPUT_SIGNALS:
            raise SchemaError(f"EWMA source must be one of {INPUT_SIGNALS}, got {self.source!r}")
        if not self.span > 0:
            raise ValueError(f"EWMA span must be positive, got {self.span}")

    def alpha(self, dt: float) -> float:
        return 1.0 - math.exp(-dt / self.span)

    @property
    def name(self) -> str:
        return f"ewma_{self.source}_{self.span:g}s"

    def to_dict(self) -> dict:
        return {"source": self.source, "span": float(self.span)}


FAST_SPAN = 180.0
SLOW_SPAN = 1800.0
DEFAULT_EWMA_SPECS = tuple(EwmaSpec(src, span) for span in (FAST_SPAN, SLOW_SPAN) for src in INPUT_SIGNALS)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows are timesteps; ``columns`` holds (name, provenance) per column."""

    values: np.ndarray
    columns: tuple
    dt: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("feature values must be two-dimensional")
        columns = tuple(tuple(c) for c in self.columns)
        if values.shape[1] != len(columns):
            raise ValueError(f"{values.shape[1]} value columns but {len(columns)} column labels")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.columns]

    @property
    def shape(self):
        return self.values.shape

    def __len__(self) -> int:
        return self.values.shape[0]

    def with_values(self, values) -> "FeatureMatrix":
        return FeatureMatrix(values, self.columns, self.dt)

    def with_column(self, name: str, values, provenance: str = "user") -> "FeatureMatrix":
        col = np.asarray(values, dtype=float).reshape(-1, 1)
        return FeatureMatrix(np.hstack([self.values, col]), self.columns + ((name, provenance),), self.dt)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def ewma(series, span: float, dt: float) -> np.ndarray:
    """Recursive EWMA seeded with the first value, alpha = 1 - exp(-dt/span)."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("ewma needs a non-empty one-dimensional series")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return ewma_alpha(x, 1.0 - math.exp(-dt / span))


def ewma_alpha(x: np.ndarray, alpha: float) -> np.ndarray:
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    # y_t = a x_t + (1-a) y_{t-1}, with y_0 = x_0
    zi = np.array([(1.0 - alpha) * x[0]])
    y, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], x, zi=zi)
    return y


def expand_features(p: Profile, specs: Optional[Sequence[EwmaSpec]] = DEFAULT_EWMA_SPECS) -> FeatureMatrix:
    """Raw inputs [f_d, I_d, P_d, T_amb] followed by one column per EWMA spec."""
    specs = tuple(specs or ())
    dt = float(p.nominal_dt)
    cols = [p.signal(name) for name in INPUT_SIGNALS]
    labels = [(name, "raw") for name in INPUT_SIGNALS]
    for spec in specs:
        if spec.source not in INPUT_SIGNALS:
            raise SchemaError(f"EWMA spec references absent signal {spec.source!r}")
        cols.append(ewma(p.signal(spec.source), spec.span, dt))
        labels.append((spec.name, f"ewma(source={spec.source}, span={spec.span:g}s)"))
    values = np.column_stack(cols) if len(p) else np.zeros((0, len(cols)))
    if not np.all(np.isfinite(values)):
        raise ValueError(f"profile {p.id!r}: non-finite feature values")
    return FeatureMatrix(values, tuple(labels), dt)


def specs_from_config(items) -> tuple:
    """Build EwmaSpecs from ``[{"source": ..., "span": ...}, ...]`` or ``[(source, span), ...]``."""
    out = []
    for item in items:
        if isinstance(item, EwmaSpec):
            out.append(item)
        elif isinstance(item, dict):
            out.append(EwmaSpec(item["source"], float(item["span"])))
        else:
            source, span = item
            out.append(EwmaSpec(source, float(span)))
    return tuple(out)
