"""Synthetic drive test bench.

Generates normalized frequency/load operating profiles, simulates the power
module case temperature with a single-node thermal RC network driven by an
IGBT-style loss model, and optionally injects a cooling fault (increased
case-to-ambient thermal resistance, e.g. a partially blocked air outlet).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigError
from .telemetry import Profile

SEGMENT_KINDS = ("hold", "ramp", "random-steps")


@dataclass(frozen=True)
class RatedValues:
    I_rated: float = 38.0  # A, drive current rating
    f_rated: float = 50.0  # Hz
    P_rated: float = 15000.0  # W


@dataclass(frozen=True)
class PlantParams:
    R_th: float = 0.5  # K/W
    C_th: float = 600.0  # J/K
    k_c: float = 0.05  # W/A^2
    k_s: float = 0.004  # W/(A*Hz)
    k_0: float = 5.0  # W
    noise_sigma: float = 0.2  # K

    def __post_init__(self):
        if not (self.R_th > 0 and self.C_th > 0):
            raise ConfigError("R_th and C_th must be positive")
        if min(self.k_c, self.k_s, self.k_0) < 0:
            raise ConfigError("loss coefficients must be non-negative")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")

    @property
    def tau(self) -> float:
        return self.R_th * self.C_th

    def losses(self, f_d, I_d) -> np.ndarray:
        f_d = np.asarray(f_d, dtype=float)
        I_d = np.asarray(I_d, dtype=float)
        return self.k_c * I_d**2 + self.k_s * f_d * I_d + self.k_0


@dataclass(frozen=True)
class FaultSpec:
    t_fault: float
    r_multiplier: float = 1.5
    ambient_coupling: float = 0.0

    def __post_init__(self):
        if self.r_multiplier < 1:
            raise ConfigError("r_multiplier must be >= 1")
        if not 0 <= self.ambient_coupling <= 1:
            raise ConfigError("ambient_coupling must lie in [0, 1]")


@dataclass(frozen=True)
class Segment:
    """One piece of an operating profile.

    ``freq`` and ``load`` are normalized (lo, hi) ranges. A hold draws one
    level per signal inside its range (a degenerate range fixes it), a ramp
    goes linearly from lo to hi, random-steps draws a new level after each
    dwell time sampled from ``dwell``.
    """

    kind: str
    duration: float
    freq: tuple = (1.0, 1.0)
    load: tuple = (1.0, 1.0)
    dwell: tuple = (30.0, 600.0)

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ConfigError(f"segment kind must be one of {SEGMENT_KINDS}, got {self.kind!r}")
        if not self.duration > 0:
            raise ConfigError("segment duration must be positive")
        object.__setattr__(self, "freq", tuple(float(v) for v in self.freq))
        object.__setattr__(self, "load", tuple(float(v) for v in self.load))
        object.__setattr__(self, "dwell", tuple(float(v) for v in self.dwell))
        for name in ("freq", "load"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
                raise ConfigError(f"segment {name} range {(lo, hi)} outside [0, 1]")
            if self.kind != "ramp" and lo > hi:
                raise ConfigError(f"segment {name} range must satisfy lo <= hi")
        if not 0 < self.dwell[0] <= self.dwell[1]:
            raise ConfigError("dwell range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class ProfileSpec:
    duration: float
    dt: float = 1.0
    segments: tuple = ()
    seed: int = 0
    ambient_base: float = 25.0
    ambient_drift: float = 3.0

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(**s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not (self.duration > 0 and self.dt > 0):
            raise ConfigError("duration and dt must be positive")
        if self.ambient_drift < 0:
            raise ConfigError("ambient_drift must be non-negative")
        if segs:
            total = sum(s.duration for s in segs)
            if not math.isclose(total, self.duration, rel_tol=1e-9, abs_tol=1e-9):
                raise ConfigError(f"segment durations sum to {total}, profile duration is {self.duration}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))


def _segment_levels(seg: Segment, n: int, dt: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if seg.kind == "hold":
        return np.full(n, rng.uniform(*seg.freq)), np.full(n, rng.uniform(*seg.load))
    if seg.kind == "ramp":
        frac = np.arange(n) * dt / seg.duration
        f0, f1 = seg.freq
        l0, l1 = seg.load
        return f0 + (f1 - f0) * frac, l0 + (l1 - l0) * frac
    freq = np.empty(n)
    load = np.empty(n)
    i = 0
    while i < n:
        steps = max(1, int(round(rng.uniform(*seg.dwell) / dt)))
        freq[i : i + steps] = rng.uniform(*seg.freq)
        load[i : i + steps] = rng.uniform(*seg.load)
        i += steps
    return freq, load


def _ambient(spec: ProfileSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) * spec.dt
    if spec.ambient_drift == 0 or n == 0:
        return np.full(n, spec.ambient_base)
    period = rng.uniform(2.0, 8.0) * 3600.0
    phase = rng.uniform(0.0, 2.0 * math.pi)
    slow = 0.6 * spec.ambient_drift * np.sin(2.0 * math.pi * t / period + phase)
    walk = np.cumsum(rng.normal(0.0, 1.0, n)) * math.sqrt(spec.dt / 3600.0)
    peak = np.max(np.abs(walk))
    if peak > 0:
        walk *= 0.4 * spec.ambient_drift / max(peak, 1.0)
    return spec.ambient_base + slow + walk


def generate_profile(spec: ProfileSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (normalized frequency, normalized load, ambient degC) series for ``spec``."""
    if not spec.segments:
        raise ConfigError("profile spec has no segments")
    rng = np.random.default_rng(spec.seed)
    n_total = spec.n_samples
    freq, load = [], []
    elapsed = 0.0
    done = 0
    for seg in spec.segments:
        elapsed += seg.duration
        n = int(round(elapsed / spec.dt)) - done
        f, l = _segment_levels(seg, n, spec.dt, rng)
        freq.append(f)
        load.append(l)
        done += n
    freq = np.clip(np.concatenate(freq)[:n_total], 0.0, 1.0)
    load = np.clip(np.concatenate(load)[:n_total], 0.0, 1.0)
    return freq, load, _ambient(spec, n_total, rng)


def simulate_plant(
    freq,
    load,
    ambient,
    params: PlantParams = PlantParams(),
    fault: Optional[FaultSpec] = None,
    seed: int = 0,
    dt: float = 1.0,
    rated: RatedValues = RatedValues(),
    id: str = "profile",
    noise: bool = True,
) -> Profile:
    """Simulate one profile of drive signals and case temperature.

    Inputs are held constant over each step, so the first-order response is
    integrated exactly: ``T+ = T_ss + (T - T_ss) * exp(-dt / (R_eff * C))``.
    """
    freq = np.asarray(freq, dtype=float)
    load = np.asarray(load, dtype=float)
    ambient = np.asarray(ambient, dtype=float)
    n = len(freq)
    if not (len(load) == n and len(ambient) == n):
        raise ValueError(f"series lengths differ: freq={n}, load={len(load)}, ambient={len(ambient)}")
    if n == 0:
        raise ValueError("cannot simulate an empty profile")

    t = np.arange(n) * dt
    f_d = freq * rated.f_rated
    I_d = load * rated.I_rated
    # Output power: mechanical power scales with speed times torque.
    P_d = freq * load * rated.P_rated
    p_loss = params.losses(f_d, I_d)

    r_eff = np.full(n, params.R_th)
    if fault is not None:
        r_eff[t >= fault.t_fault] *= fault.r_multiplier
    decay = np.exp(-dt / (r_eff * params.C_th))

    tc = np.empty(n)
    tc[0] = ambient[0]
    for k in range(n - 1):
        t_ss = ambient[k] + r_eff[k] * p_loss[k]
        tc[k + 1] = t_ss + (tc[k] - t_ss) * decay[k]

    t_amb_measured = ambient.copy()
    if fault is not None and fault.ambient_coupling > 0:
        after = t >= fault.t_fault
        t_amb_measured[after] += fault.ambient_coupling * (tc[after] - ambient[after])

    if noise and params.noise_sigma > 0:
        tc = tc + np.random.default_rng(seed).normal(0.0, params.noise_sigma, n)
    return Profile(id=id, t=t, f_d=f_d, I_d=I_d, P_d=P_d, T_amb=t_amb_measured, T_C=tc, nominal_dt=dt)


IDLE_FRACTION = 0.05


def _template_segments(kind: str, duration: float) -> tuple:
    """Built-in cycle shapes; each starts with an idle hold so the drive leaves thermal equilibrium."""
    idle = IDLE_FRACTION * duration
    return (Segment("hold", idle, freq=(0.0, 0.0), load=(0.0, 0.0)),) + _template_body(kind, duration - idle)


def _template_body(kind: str, duration: float) -> tuple:
    q = duration / 4.0
    if kind == "static":
        return tuple(Segment("hold", q, freq=(0.3, 1.0), load=(0.2, 1.0)) for _ in range(4))
    if kind == "dynamic":
        # fast steps riding on slow changes of the operating band
        bands = ((0.0, 0.5), (0.5, 1.0), (0.2, 0.7), (0.4, 1.0))
        return tuple(Segment("random-steps", q, freq=(0.1, 1.0), load=b, dwell=(20.0, 300.0)) for b in bands)
    if kind == "nominal-then-dynamic":
        head = 0.3 * duration
        return (
            Segment("hold", head, freq=(1.0, 1.0), load=(1.0, 1.0)),
            Segment("random-steps", duration - head, freq=(0.1, 1.0), load=(0.0, 1.0), dwell=(30.0, 600.0)),
        )
    if kind == "ramps":
        return (
            Segment("ramp", q, freq=(0.2, 1.0), load=(0.0, 1.0)),
            Segment("hold", q, freq=(1.0, 1.0), load=(0.7, 1.0)),
            Segment("ramp", q, freq=(1.0, 0.3), load=(1.0, 0.1)),
            Segment("random-steps", q, freq=(0.2, 1.0), load=(0.1, 1.0), dwell=(60.0, 900.0)),
        )
    if kind == "heavy-duty":
        # long dwells near nominal load, used for the cooling-fault scenario
        return (Segment("random-steps", duration, freq=(0.8, 1.0), load=(0.85, 1.0), dwell=(600.0, 1800.0)),)
    raise ConfigError(f"unknown profile template {kind!r}")


DATASET_TEMPLATES = ("static", "dynamic", "nominal-then-dynamic", "ramps")
PROFILE_TEMPLATES = DATASET_TEMPLATES + ("heavy-duty",)


def template_spec(kind: str, duration: float = 8 * 3600.0, seed: int = 0, **kwargs) -> ProfileSpec:
    """ProfileSpec for a named built-in cycle; extra keywords go to ProfileSpec."""
    return ProfileSpec(duration=duration, segments=_template_segments(kind, duration), seed=seed, **kwargs)


def profile_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def dataset_specs(n_profiles: int, base_spec: ProfileSpec, seed: int) -> list[ProfileSpec]:
    """Per-profile specs: base segments if given, else a rotating static/dynamic template mix."""
    seeds = profile_seeds(seed, n_profiles)
    specs = []
    for i, s in enumerate(seeds):
        segments = base_spec.segments or _template_segments(
            DATASET_TEMPLATES[i % len(DATASET_TEMPLATES)], base_spec.duration
        )
        specs.append(replace(base_spec, segments=segments, seed=s))
    return specs


def generate_dataset(
    n_profiles: int = 17,
    base_spec: Optional[ProfileSpec] = None,
    params: PlantParams = PlantParams(),
    seed: int = 0,
    rated: RatedValues = RatedValues(),
    fault: Optional[FaultSpec] = None,
) -> list[Profile]:
    """Simulate ``n_profiles`` profiles with derived per-profile seeds."""
    if n_profiles < 2:
        raise ConfigError("a dataset needs at least two profiles")
    base_spec = base_spec or ProfileSpec(duration=8 * 3600.0)
    out = []
    for i, spec in enumerate(dataset_specs(n_profiles, base_spec, seed)):
        freq, load, amb = generate_profile(spec)
        out.append(
            simulate_plant(
                freq, load, amb, params, fault=fault, seed=spec.seed + 1, dt=spec.dt, rated=rated, id=f"profile_{i:02d}"
            )
        )
    return out


def spec_to_dict(spec: ProfileSpec) -> dict:
    d = asdict(spec)
    d["segments"] = [asdict(s) for s in spec.segments]
    return d
