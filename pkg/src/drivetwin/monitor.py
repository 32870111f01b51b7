"""Residual-based condition monitoring.

The residual is measured minus predicted case temperature. An alert is raised
when the trailing rolling mean of the residual stays beyond a threshold for a
persistence time. ``direction`` names the model error: ``under`` means the
model under-predicts (measured is hotter, e.g. degraded cooling), ``over``
the opposite.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, SchemaError, ThresholdError
from .telemetry import Profile


@dataclass(frozen=True)
class MonitorConfig:
    window: float = 300.0  # s, rolling-mean length
    threshold: float = 2.0  # degC
    persistence: float = 120.0  # s
    warmup: float = 1800.0  # s ignored at stream start

    def __post_init__(self):
        if min(self.window, self.persistence, self.warmup) < 0:
            raise ConfigError("window, persistence and warmup must be >= 0")
        if not self.threshold > 0:
            raise ConfigError("threshold must be > 0")

    def window_samples(self, dt: float) -> int:
        if dt <= 0:
            raise ConfigError("dt must be positive")
        if self.window < dt:
            raise ConfigError(f"window {self.window} s is shorter than the sample period {dt} s")
        return int(round(self.window / dt))


@dataclass(frozen=True)
class AlertEvent:
    onset_t: float
    detect_t: float
    peak: float  # largest |rolling mean| between onset and detection, degC
    direction: str

    def summary(self) -> str:
        return (
            f"ALERT {self.direction}-prediction: onset t={self.onset_t:.0f}s, "
            f"detected t={self.detect_t:.0f}s, peak rolling residual {self.peak:.2f} degC"
        )


def stream_residuals(estimator, profile: Profile) -> np.ndarray:
    """Measured minus predicted case temperature, one value per sample.

    Feature expansion and all supported models are causal, so the value at t
    depends on samples up to t only.
    """
    if not profile.has_target:
        raise SchemaError(f"profile {profile.id!r} has no measured T_C to compare against")
    return profile.T_C - estimator.predict_profile(profile)


def rolling_mean(x, n: int) -> np.ndarray:
    """Trailing mean over the last ``n`` samples (fewer at the start)."""
    x = np.asarray(x, dtype=float)
    if n < 1:
        raise ValueError("window must cover at least one sample")
    c = np.concatenate([[0.0], np.cumsum(x)])
    k = np.arange(1, len(x) + 1)
    lo = np.maximum(k - n, 0)
    return (c[k] - c[lo]) / (k - lo)


class ResidualMonitor:
    """Sequential detector; feed residuals in any chunking, get identical alerts."""

    def __init__(self, cfg: MonitorConfig, dt: float = 1.0, t0: float = 0.0):
        self.cfg = cfg
        self.dt = float(dt)
        self.t0 = float(t0)
        self.n_window = cfg.window_samples(self.dt)
        self._buf: deque = deque()
        self._sum = 0.0
        self._k = 0
        self._run: Optional[dict] = None

    def update(self, residuals: Iterable[float]) -> list[AlertEvent]:
        cfg = self.cfg
        events = []
        for r in residuals:
            r = float(r)
            self._buf.append(r)
            self._sum += r
            if len(self._buf) > self.n_window:
                self._sum -= self._buf.popleft()
            mean = self._sum / len(self._buf)
            t = self.t0 + self._k * self.dt
            self._k += 1
            if t - self.t0 < cfg.warmup or not abs(mean) > cfg.threshold:
                self._run = None
                continue
            direction = "under" if mean > 0 else "over"
            run = self._run
            if run is None or run["direction"] != direction:
                run = self._run = {"onset": t, "direction": direction, "peak": abs(mean), "alerted": False}
            else:
                run["peak"] = max(run["peak"], abs(mean))
            if not run["alerted"] and t - run["onset"] >= cfg.persistence - 1e-9 * self.dt:
                run["alerted"] = True
                events.append(AlertEvent(run["onset"], t, run["peak"], direction))
        return events


def detect(residuals, cfg: MonitorConfig, dt: float = 1.0, t0: float = 0.0) -> list[AlertEvent]:
    """Alerts for a complete residual series sampled every ``dt`` seconds from ``t0``."""
    return ResidualMonitor(cfg, dt, t0).update(np.asarray(residuals, dtype=float))


def calibrate_threshold(
    archive: Sequence,
    window: float,
    dt: float = 1.0,
    q: float = 0.999,
    factor: float = 1.5,
    warmup: float = 0.0,
) -> float:
    """``factor`` times the q-quantile of |rolling mean| over healthy residual series."""
    if not 0 < q <= 1:
        raise ThresholdError("quantile must lie in (0, 1]")
    series = [np.asarray(a, dtype=float) for a in archive] if len(archive) and np.ndim(archive[0]) else [
        np.asarray(archive, dtype=float)
    ]
    if window < dt:
        raise ConfigError(f"window {window} s is shorter than the sample period {dt} s")
    n = int(round(window / dt))
    skip = int(math.ceil(warmup / dt - 1e-9))
    values = [np.abs(rolling_mean(s, n))[skip:] for s in series if len(s)]
    values = np.concatenate(values) if values else np.zeros(0)
    if values.size == 0:
        raise ThresholdError("healthy residual archive is empty")
    threshold = factor * float(np.quantile(values, q))
    if not threshold > 0:
        raise ThresholdError("calibrated threshold is zero; the healthy archive needs a non-zero noise floor")
    return threshold


def alerts_csv(events: Sequence[AlertEvent]) -> str:
    lines = ["onset_t,detect_t,peak,direction"]
    lines += [f"{e.onset_t!r},{e.detect_t!r},{e.peak!r},{e.direction}" for e in events]
    return "\n".join(lines) + "\n"


def residuals_csv(profile: Profile, predicted, window_samples: int) -> str:
    r = profile.T_C - np.asarray(predicted)
    m = rolling_mean(r, window_samples)
    lines = ["t,measured,predicted,residual,rolling_mean"]
    lines += [f"{t!r},{y!r},{p!r},{e!r},{a!r}" for t, y, p, e, a in zip(
        map(float, profile.t), map(float, profile.T_C), map(float, predicted), map(float, r), map(float, m))]
    return "\n".join(lines) + "\n"
