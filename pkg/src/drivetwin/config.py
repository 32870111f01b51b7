"""Run configuration: YAML file plus flag overrides, validated against known sections and keys.

The resolved configuration (defaults included) is plain data and is written
next to every command's outputs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import yaml

from .errors import ArtifactError, ConfigError
from .features import DEFAULT_EWMA_SPECS, EwmaSpec
from .models import MODEL_KINDS, hyperparameter_names
from .monitor import MonitorConfig
from .testbench import (
    DATASET_TEMPLATES,
    PROFILE_TEMPLATES,
    FaultSpec,
    PlantParams,
    ProfileSpec,
    RatedValues,
    Segment,
    dataset_specs,
    profile_seeds,
    template_spec,
)

# search ranges used when the config gives none
DEFAULT_SEARCH_SPACES = {
    "elastic_net": {"lam": {"log_uniform": [1e-6, 1e-1]}, "rho": {"uniform": [0.0, 1.0]}},
    "mlp": {
        "lr": {"log_uniform": [1e-4, 1e-2]},
        "hidden": {"choice": [[32, 32], [64, 64], [64, 32]]},
        "activation": {"choice": ["relu", "tanh"]},
    },
    "tcn": {"lr": {"log_uniform": [1e-4, 1e-2]}, "channels": {"choice": [8, 16]}},
}


def _fields(cls) -> dict:
    return {f.name: f.default for f in fields(cls)}


DEFAULTS: dict = {
    "bench": {
        "n_profiles": 17,
        "duration": 8 * 3600.0,
        "dt": 1.0,
        "template": None,
        "ambient_base": 25.0,
        "ambient_drift": 3.0,
        "profiles": [],
        "plant": _fields(PlantParams),
        "rated": _fields(RatedValues),
        "fault": None,
    },
    "features": {"ewma": [s.to_dict() for s in DEFAULT_EWMA_SPECS]},
    "model": {"kind": "mlp", "params": {}},
    "eval": {
        "folds": "lopo",
        "models": [{"kind": k, "params": {}, "name": k} for k in ("elastic_net", "mlp", "tcn")],
        "histogram_bins": 60,
        "search": {"space": {}, "budget": 20, "val_fraction": 0.2},
        "importance": {"n_repeats": 5},
    },
    "monitor": {**_fields(MonitorConfig), "threshold": None, "q": 0.999, "factor": 1.5},
    "io": {
        "seed": 0,
        "out": "out",
        "data": None,
        "model": None,
        "profile": None,
        "healthy": None,
        "columns": {},
        "nominal_dt": 1.0,
    },
}

# keys whose values are free-form mappings or lists, validated separately
_OPAQUE = {
    ("bench", "profiles"),
    ("bench", "fault"),
    ("features", "ewma"),
    ("model", "params"),
    ("eval", "models"),
    ("eval", "search", "space"),
    ("io", "columns"),
}

_PROFILE_KEYS = {"id", "template", "segments", "duration", "dt", "seed", "ambient_base", "ambient_drift"}
_SEGMENT_KEYS = {f.name for f in fields(Segment)}
_FAULT_KEYS = {f.name for f in fields(FaultSpec)}


def _merge(base: dict, update: Mapping, path: tuple) -> dict:
    out = copy.deepcopy(base)
    if not isinstance(update, Mapping):
        raise ConfigError(f"[{'.'.join(path)}] expected a mapping, got {type(update).__name__}", *_sk(path))
    for key, value in update.items():
        here = path + (key,)
        if key not in base:
            section = path[0] if path else key
            raise ConfigError(f"[{section}] unknown key {'.'.join(here[1:]) or key!r}", *_sk(here))
        if here in _OPAQUE or not isinstance(base[key], dict):
            out[key] = copy.deepcopy(value)
        else:
            out[key] = _merge(base[key], value if value is not None else {}, here)
    return out


def _sk(path: tuple) -> tuple:
    return (path[0] if path else None, ".".join(path[1:]) if len(path) > 1 else None)


def _err(section: str, key: str, message: str) -> ConfigError:
    return ConfigError(f"[{section}] {key}: {message}", section, key)


def parse_override(item: str) -> tuple[tuple, Any]:
    """``section.key=value``; the value is parsed as YAML (numbers, lists, null, ...)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    dotted, raw = item.split("=", 1)
    path = tuple(p for p in dotted.strip().split(".") if p)
    if len(path) < 2:
        raise ConfigError(f"override {item!r} must name a section and a key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {item!r}: cannot parse value ({exc})", path[0], ".".join(path[1:])) from exc
    return path, value


def _nest(path: tuple, value) -> dict:
    d: Any = value
    for p in reversed(path):
        d = {p: d}
    return d


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def resolve(cls, raw: Optional[Mapping] = None, overrides: Sequence = ()) -> "RunConfig":
        """Defaults, then the file's mapping, then each ``(path, value)`` override in order."""
        data = _merge(DEFAULTS, raw or {}, ())
        for path, value in overrides:
            data = _merge(data, _nest(tuple(path), value), ())
        cfg = cls(data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path=None, overrides: Sequence = ()) -> "RunConfig":
        raw = {}
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ArtifactError(f"config file not found: {p}", str(p))
            try:
                raw = yaml.safe_load(p.read_text()) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{p}: invalid YAML ({exc})") from exc
        return cls.resolve(raw, overrides)

    def section(self, name: str) -> dict:
        return self.data[name]

    @property
    def seed(self) -> int:
        return int(self.data["io"]["seed"])

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)

    # --- typed views -------------------------------------------------------

    def plant_params(self) -> PlantParams:
        return _build("bench", "plant", PlantParams, self.data["bench"]["plant"])

    def rated_values(self) -> RatedValues:
        return _build("bench", "rated", RatedValues, self.data["bench"]["rated"])

    def fault_spec(self) -> Optional[FaultSpec]:
        f = self.data["bench"]["fault"]
        if f is None:
            return None
        if not isinstance(f, Mapping):
            raise _err("bench", "fault", "expected a mapping or null")
        unknown = set(f) - _FAULT_KEYS
        if unknown:
            raise _err("bench", f"fault.{sorted(unknown)[0]}", "unknown key")
        return _build("bench", "fault", FaultSpec, f)

    def profile_specs(self) -> list[tuple[str, ProfileSpec]]:
        """(id, spec) for every profile the bench should simulate."""
        b = self.data["bench"]
        common = {"dt": float(b["dt"]), "ambient_base": float(b["ambient_base"]), "ambient_drift": float(b["ambient_drift"])}
        if b["profiles"]:
            seeds = profile_seeds(self.seed, len(b["profiles"]))
            return [self._explicit_profile(i, item, seeds[i], common) for i, item in enumerate(b["profiles"])]
        n = int(b["n_profiles"])
        if n < 1:
            raise _err("bench", "n_profiles", "must be >= 1")
        duration = float(b["duration"])
        try:
            if b["template"] is None:
                base = ProfileSpec(duration=duration, **common)
                specs = dataset_specs(n, base, self.seed)
            else:
                specs = [
                    template_spec(b["template"], duration, seed=s, **common) for s in profile_seeds(self.seed, n)
                ]
        except (ConfigError, ValueError) as exc:
            raise _err("bench", "template" if b["template"] else "duration", str(exc)) from exc
        return [(f"profile_{i:02d}", s) for i, s in enumerate(specs)]

    def _explicit_profile(self, i: int, item, seed: int, common: dict) -> tuple[str, ProfileSpec]:
        key = f"profiles[{i}]"
        if not isinstance(item, Mapping):
            raise _err("bench", key, "expected a mapping")
        unknown = set(item) - _PROFILE_KEYS
        if unknown:
            raise _err("bench", f"{key}.{sorted(unknown)[0]}", "unknown key")
        kw = dict(common)
        kw.update({k: float(item[k]) for k in ("dt", "ambient_base", "ambient_drift") if k in item})
        duration = float(item.get("duration", self.data["bench"]["duration"]))
        seed = int(item.get("seed", seed))
        try:
            if "segments" in item:
                segs = []
                for j, s in enumerate(item["segments"]):
                    bad = set(s) - _SEGMENT_KEYS
                    if bad:
                        raise _err("bench", f"{key}.segments[{j}].{sorted(bad)[0]}", "unknown key")
                    segs.append(Segment(**{k: tuple(v) if isinstance(v, list) else v for k, v in s.items()}))
                spec = ProfileSpec(duration=duration, segments=tuple(segs), seed=seed, **kw)
            else:
                spec = template_spec(item.get("template", DATASET_TEMPLATES[i % len(DATASET_TEMPLATES)]), duration, seed=seed, **kw)
        except ConfigError as exc:
            if exc.section:
                raise
            raise _err("bench", key, str(exc)) from exc
        except (TypeError, ValueError) as exc:
            raise _err("bench", key, str(exc)) from exc
        return str(item.get("id", f"profile_{i:02d}")), spec

    def ewma_specs(self) -> tuple:
        out = []
        for i, item in enumerate(self.data["features"]["ewma"] or []):
            try:
                if not isinstance(item, Mapping) or set(item) != {"source", "span"}:
                    raise ValueError("each entry needs exactly 'source' and 'span'")
                out.append(EwmaSpec(item["source"], float(item["span"])))
            except (ValueError, TypeError, ConfigError) as exc:
                raise _err("features", f"ewma[{i}]", str(exc)) from exc
        return tuple(out)

    def model_kind(self) -> str:
        return self.data["model"]["kind"]

    def model_params(self) -> dict:
        return dict(self.data["model"]["params"] or {})

    def eval_models(self) -> list[dict]:
        return [dict(m) for m in self.data["eval"]["models"]]

    def search_space(self) -> dict:
        space = self.data["eval"]["search"]["space"]
        return dict(space) if space else copy.deepcopy(DEFAULT_SEARCH_SPACES[self.model_kind()])

    def monitor_config(self, threshold: Optional[float] = None) -> MonitorConfig:
        m = self.data["monitor"]
        thr = m["threshold"] if threshold is None else threshold
        if thr is None:
            raise _err("monitor", "threshold", "not set and no healthy archive to calibrate from")
        try:
            return MonitorConfig(float(m["window"]), float(thr), float(m["persistence"]), float(m["warmup"]))
        except ConfigError as exc:
            raise _err("monitor", "window", str(exc)) from exc

    def column_map(self) -> dict:
        return dict(self.data["io"]["columns"] or {})

    # --- validation ----------------------------------------------------------

    def validate(self) -> None:
        self.plant_params()
        self.rated_values()
        self.fault_spec()
        self.profile_specs()
        self.ewma_specs()
        kind = self.model_kind()
        if kind not in MODEL_KINDS:
            raise _err("model", "kind", f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}")
        _check_params("model", "params", kind, self.model_params())
        models = self.data["eval"]["models"]
        if not isinstance(models, list) or not models:
            raise _err("eval", "models", "expected a non-empty list")
        for i, m in enumerate(models):
            if not isinstance(m, Mapping) or set(m) - {"kind", "params", "name"} or "kind" not in m:
                raise _err("eval", f"models[{i}]", "entries take 'kind' and optional 'params', 'name'")
            if m["kind"] not in MODEL_KINDS:
                raise _err("eval", f"models[{i}].kind", f"unknown model kind {m['kind']!r}")
            _check_params("eval", f"models[{i}].params", m["kind"], m.get("params") or {})
        ev = self.data["eval"]
        if ev["folds"] != "lopo":
            raise _err("eval", "folds", "only 'lopo' (leave-one-profile-out) is supported")
        if int(ev["histogram_bins"]) < 1:
            raise _err("eval", "histogram_bins", "must be >= 1")
        if int(ev["search"]["budget"]) < 1:
            raise _err("eval", "search.budget", "must be >= 1")
        if not 0 < float(ev["search"]["val_fraction"]) < 1:
            raise _err("eval", "search.val_fraction", "must lie in (0, 1)")
        space = ev["search"]["space"]
        if space:
            if not isinstance(space, Mapping):
                raise _err("eval", "search.space", "expected a mapping")
            bad = set(space) - hyperparameter_names(kind)
            if bad:
                raise _err("eval", f"search.space.{sorted(bad)[0]}", f"not a {kind} hyperparameter")
        if int(ev["importance"]["n_repeats"]) < 1:
            raise _err("eval", "importance.n_repeats", "must be >= 1")
        m = self.data["monitor"]
        if m["threshold"] is not None:
            self.monitor_config()
        else:
            self.monitor_config(threshold=1.0)
        if not 0 < float(m["q"]) <= 1:
            raise _err("monitor", "q", "must lie in (0, 1]")
        if not float(m["factor"]) > 0:
            raise _err("monitor", "factor", "must be > 0")
        io = self.data["io"]
        if not isinstance(io["seed"], int) or isinstance(io["seed"], bool):
            raise _err("io", "seed", "must be an integer")
        if not isinstance(io["columns"] or {}, Mapping):
            raise _err("io", "columns", "expected a mapping of signal name to CSV header")
        if not float(io["nominal_dt"]) > 0:
            raise _err("io", "nominal_dt", "must be > 0")


def _build(section: str, key: str, cls, values: Mapping):
    known = {f.name for f in fields(cls)}
    bad = set(values) - known
    if bad:
        raise _err(section, f"{key}.{sorted(bad)[0]}", "unknown key")
    try:
        return cls(**{k: float(v) if isinstance(v, int) and not isinstance(v, bool) else v for k, v in values.items()})
    except (TypeError, ValueError, ConfigError) as exc:
        raise _err(section, key, str(exc)) from exc


def _check_params(section: str, key: str, kind: str, params) -> None:
    if not isinstance(params, Mapping):
        raise _err(section, key, "expected a mapping")
    bad = set(params) - hyperparameter_names(kind)
    if bad:
        raise _err(section, f"{key}.{sorted(bad)[0]}", f"not a {kind} hyperparameter")


__all__ = ["RunConfig", "DEFAULTS", "DEFAULT_SEARCH_SPACES", "parse_override", "PROFILE_TEMPLATES"]
