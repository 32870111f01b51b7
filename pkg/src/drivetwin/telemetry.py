"""Drive telemetry data model, CSV exchange, resampling and min-max scaling.

A :class:`Profile` stores its signals column-wise as read-only numpy arrays;
:attr:`Profile.samples` gives the row view as :class:`TelemetrySample` records.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import OrderingError, ParseError, SchemaError, StateError
from .fileio import atomic_write_text

INPUT_SIGNALS = ("f_d", "I_d", "P_d", "T_amb")
TARGET_SIGNAL = "T_C"
DEFAULT_SCHEMA = {name: name for name in ("t",) + INPUT_SIGNALS + (TARGET_SIGNAL,)}

T_C_BOUNDS = (-50.0, 250.0)
GAP_WARN_FACTOR = 10.0


@dataclass(frozen=True)
class TelemetrySample:
    t: float
    f_d: float
    I_d: float
    P_d: float
    T_amb: float
    T_C: Optional[float] = None

    def __post_init__(self):
        if self.t < 0 or not math.isfinite(self.t):
            raise ValueError(f"t must be a non-negative finite time, got {self.t}")
        if not self.I_d >= 0:
            raise ValueError(f"I_d must be >= 0, got {self.I_d}")
        if not self.f_d >= 0:
            raise ValueError(f"f_d must be >= 0, got {self.f_d}")
        if self.T_C is not None:
            _check_case_temperature(np.asarray([self.T_C]))


def _check_case_temperature(tc: np.ndarray) -> None:
    lo, hi = T_C_BOUNDS
    bad = ~np.isfinite(tc) | (tc < lo) | (tc > hi)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"T_C[{i}] = {tc[i]} outside physical range [{lo}, {hi}] degC")


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Profile:
    """One operating profile: an ordered, timestamped series of drive signals."""

    id: str
    t: np.ndarray
    f_d: np.ndarray
    I_d: np.ndarray
    P_d: np.ndarray
    T_amb: np.ndarray
    T_C: Optional[np.ndarray] = None
    nominal_dt: float = 1.0

    def __post_init__(self):
        for name in ("t",) + INPUT_SIGNALS:
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        if self.T_C is not None:
            object.__setattr__(self, "T_C", _frozen(self.T_C, "T_C"))
        n = len(self.t)
        for name in INPUT_SIGNALS + ((TARGET_SIGNAL,) if self.T_C is not None else ()):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} values, t has {n}")
        if self.nominal_dt <= 0:
            raise ValueError("nominal_dt must be positive")
        if n and (self.t[0] < 0 or not np.all(np.isfinite(self.t))):
            raise ValueError("timestamps must be finite and non-negative")
        steps = np.diff(self.t)
        if np.any(steps <= 0):
            i = int(np.argmax(steps <= 0)) + 1
            raise OrderingError(f"profile {self.id!r}: timestamp at index {i} is not increasing")
        if np.any(self.I_d < 0) or np.any(self.f_d < 0):
            raise ValueError(f"profile {self.id!r}: I_d and f_d must be non-negative")
        if self.T_C is not None:
            _check_case_temperature(self.T_C)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def has_target(self) -> bool:
        return self.T_C is not None

    @property
    def samples(self) -> list[TelemetrySample]:
        tc = self.T_C if self.T_C is not None else [None] * len(self)
        return [
            TelemetrySample(float(t), float(f), float(i), float(p), float(a), None if c is None else float(c))
            for t, f, i, p, a, c in zip(self.t, self.f_d, self.I_d, self.P_d, self.T_amb, tc)
        ]

    @classmethod
    def from_samples(cls, id: str, samples: Sequence[TelemetrySample], nominal_dt: float = 1.0) -> "Profile":
        has_tc = [s.T_C is not None for s in samples]
        if any(has_tc) and not all(has_tc):
            raise SchemaError("T_C must be present on all samples or on none")
        cols = {name: [getattr(s, name) for s in samples] for name in ("t",) + INPUT_SIGNALS}
        tc = [s.T_C for s in samples] if samples and all(has_tc) else None
        return cls(id=id, T_C=tc, nominal_dt=nominal_dt, **cols)

    def signal(self, name: str) -> np.ndarray:
        if name not in INPUT_SIGNALS + (TARGET_SIGNAL,):
            raise KeyError(name)
        values = getattr(self, name)
        if values is None:
            raise SchemaError(f"profile {self.id!r} has no {name} signal")
        return values

    def head(self, n: int) -> "Profile":
        """First ``n`` samples as a new profile."""
        return self.replace(**{k: getattr(self, k)[:n] for k in self._array_fields()})

    def without_target(self) -> "Profile":
        return self.replace(T_C=None)

    def replace(self, **changes) -> "Profile":
        kwargs = {k: getattr(self, k) for k in ("id", "nominal_dt") + tuple(self._all_array_fields())}
        kwargs.update(changes)
        return Profile(**kwargs)

    def _all_array_fields(self):
        return ("t",) + INPUT_SIGNALS + (TARGET_SIGNAL,)

    def _array_fields(self):
        return [k for k in self._all_array_fields() if getattr(self, k) is not None]


def read_profile_csv(
    path,
    schema: Optional[Mapping[str, str]] = None,
    id: Optional[str] = None,
    nominal_dt: float = 1.0,
) -> Profile:
    """Parse a profile CSV.

    ``schema`` maps logical signal names (``t``, ``f_d``, ... ``T_C``) to
    header names in the file; unmapped names default to themselves. The
    target column is optional.
    """
    path = Path(path)
    names = dict(DEFAULT_SCHEMA)
    if schema:
        names.update(schema)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        index = {}
        for logical in ("t",) + INPUT_SIGNALS:
            if names[logical] not in header:
                raise SchemaError(f"{path}: missing column {names[logical]!r}")
            index[logical] = header.index(names[logical])
        if names[TARGET_SIGNAL] in header:
            index[TARGET_SIGNAL] = header.index(names[TARGET_SIGNAL])

        cols = {k: [] for k in index}
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            for logical, j in index.items():
                try:
                    cols[logical].append(float(row[j]))
                except (ValueError, IndexError):
                    cell = row[j] if j < len(row) else ""
                    raise ParseError(
                        f"{path}: row {rowno - 1} (line {rowno}), column {names[logical]!r}: cannot parse {cell!r}"
                    ) from None

    t = cols["t"]
    for k in range(1, len(t)):
        if not t[k] > t[k - 1]:
            raise OrderingError(f"{path}: non-increasing timestamp at row {k + 1} (line {k + 2}, t={t[k]})")
    return Profile(
        id=id if id is not None else path.stem,
        t=t,
        f_d=cols["f_d"],
        I_d=cols["I_d"],
        P_d=cols["P_d"],
        T_amb=cols["T_amb"],
        T_C=cols.get(TARGET_SIGNAL),
        nominal_dt=nominal_dt,
    )


def write_profile_csv(profile: Profile, path, schema: Optional[Mapping[str, str]] = None) -> None:
    """Write ``profile`` with round-trip-exact float formatting."""
    names = dict(DEFAULT_SCHEMA)
    if schema:
        names.update(schema)
    logical = ["t", *INPUT_SIGNALS] + ([TARGET_SIGNAL] if profile.has_target else [])
    columns = [getattr(profile, k) for k in logical]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([names[k] for k in logical])
    for row in zip(*columns):
        writer.writerow([repr(float(v)) for v in row])
    atomic_write_text(path, buf.getvalue())


def regularize(p: Profile, dt: float) -> Profile:
    """Resample ``p`` onto the grid ``t0, t0 + dt, ...`` by linear interpolation.

    The grid stops at the last input time; nothing is extrapolated.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(p) < 2:
        raise ValueError(f"profile {p.id!r}: need at least two samples to interpolate")
    t0, t1 = float(p.t[0]), float(p.t[-1])
    gaps = np.diff(p.t)
    if gaps.max() > GAP_WARN_FACTOR * dt:
        warnings.warn(
            f"profile {p.id!r}: gap of {gaps.max():g} s exceeds {GAP_WARN_FACTOR:g}*dt; interpolating anyway",
            stacklevel=2,
        )
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    grid = t0 + dt * np.arange(n)
    cols = {name: np.interp(grid, p.t, getattr(p, name)) for name in INPUT_SIGNALS}
    tc = np.interp(grid, p.t, p.T_C) if p.has_target else None
    return Profile(id=p.id, t=grid, T_C=tc, nominal_dt=dt, **cols)


@dataclass(frozen=True, eq=False)
class ScalerState:
    """Per-column min/max of a fitted min-max scaler."""

    mins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    maxs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fitted: bool = False
    names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "mins", _frozen(self.mins, "mins"))
        object.__setattr__(self, "maxs", _frozen(self.maxs, "maxs"))
        object.__setattr__(self, "names", tuple(self.names))
        if self.mins.shape != self.maxs.shape:
            raise ValueError("mins and maxs must have equal length")
        if np.any(self.maxs < self.mins):
            raise ValueError("scaler max must be >= min for every column")

    @property
    def width(self) -> int:
        return len(self.mins)

    def to_dict(self) -> dict:
        return {
            "mins": [float(v) for v in self.mins],
            "maxs": [float(v) for v in self.maxs],
            "names": list(self.names),
            "fitted": self.fitted,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalerState":
        return cls(mins=d["mins"], maxs=d["maxs"], names=tuple(d.get("names", ())), fitted=bool(d["fitted"]))


def _as_array(columns) -> np.ndarray:
    values = getattr(columns, "values", columns)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def fit_scaler(columns) -> ScalerState:
    """Fit per-column min/max on a FeatureMatrix, a 2-D array, or a list of either (stacked by rows)."""
    if isinstance(columns, (list, tuple)) and columns and (hasattr(columns[0], "values") or np.ndim(columns[0]) == 2):
        names = tuple(getattr(columns[0], "names", ()))
        arr = np.vstack([_as_array(c) for c in columns])
    else:
        names = tuple(getattr(columns, "names", ()))
        arr = _as_array(columns)
    if arr.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero rows")
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot fit a scaler on non-finite values")
    return ScalerState(mins=arr.min(axis=0), maxs=arr.max(axis=0), fitted=True, names=names)


def _check_scaler(state: ScalerState, arr: np.ndarray) -> None:
    if not state.fitted:
        raise StateError("scaler has not been fitted")
    if arr.shape[1] != state.width:
        raise ValueError(f"scaler fitted on {state.width} columns, got {arr.shape[1]}")


def _rewrap(columns, arr):
    if hasattr(columns, "with_values"):
        return columns.with_values(arr)
    return arr


def apply_scaler(state: ScalerState, columns):
    """Map columns affinely so the training range becomes [0, 1]. No clipping."""
    arr = _as_array(columns)
    _check_scaler(state, arr)
    span = state.maxs - state.mins
    constant = span == 0
    out = (arr - state.mins) / np.where(constant, 1.0, span)
    out[:, constant] = 0.0
    return _rewrap(columns, out)


def invert_scaler(state: ScalerState, columns):
    arr = _as_array(columns)
    _check_scaler(state, arr)
    span = state.maxs - state.mins
    return _rewrap(columns, arr * span + state.mins)


def iter_profiles(paths: Iterable, **kwargs) -> list[Profile]:
    return [read_profile_csv(p, **kwargs) for p in paths]
