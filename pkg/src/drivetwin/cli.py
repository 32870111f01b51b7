"""Command-line entry point: simulate, train, evaluate, search, importance, monitor.

Every command resolves its configuration (defaults, then ``--config``, then
``--set`` overrides, then the dedicated flags), writes the resolved config to
``<out>/config.yaml`` and emits its results as CSV/JSON. Failures print one
JSON line on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_override
from .errors import ArtifactError, ConfigError, DriveTwinError
from .estimator import load_model, save_model, train_estimator
from .evaluation import (
    ModelConfig,
    correlation_matrix,
    histogram_csv,
    leave_one_profile_out,
    permutation_importance,
    random_search,
    trials_csv,
    validation_objective,
)
from .fileio import atomic_write_text
from .monitor import alerts_csv, calibrate_threshold, detect, residuals_csv, stream_residuals
from .telemetry import read_profile_csv, write_profile_csv
from .testbench import generate_profile, simulate_plant, spec_to_dict

COMMANDS = ("simulate", "train", "evaluate", "search", "importance", "monitor")


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _profiles(cfg: RunConfig, key: str = "data") -> list:
    """Profiles from ``io.<key>``: a CSV file or a directory of CSVs (sorted by name)."""
    io = cfg.section("io")
    where = io[key]
    if where is None:
        raise ConfigError(f"[io] {key}: required by this command", "io", key)
    path = Path(where)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise ArtifactError(f"no profile CSVs in {path}", str(path))
    elif path.is_file():
        files = [path]
    else:
        raise ArtifactError(f"expected profile data at {path}", str(path))
    return [read_profile_csv(f, schema=cfg.column_map(), nominal_dt=float(io["nominal_dt"])) for f in files]


def _model(cfg: RunConfig):
    where = cfg.section("io")["model"]
    if where is None:
        raise ConfigError("[io] model: required by this command", "io", "model")
    if not Path(where).is_file():
        raise ArtifactError(f"expected model file at {where}", str(where))
    return load_model(where)


def cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    params, rated, fault = cfg.plant_params(), cfg.rated_values(), cfg.fault_spec()
    records = []
    for pid, spec in cfg.profile_specs():
        freq, load, amb = generate_profile(spec)
        kw = dict(params=params, seed=spec.seed + 1, dt=spec.dt, rated=rated, id=pid)
        write_profile_csv(simulate_plant(freq, load, amb, fault=fault, **kw), out / "profiles" / f"{pid}.csv")
        if fault is not None:
            write_profile_csv(simulate_plant(freq, load, amb, fault=None, **kw), out / "twin" / f"{pid}.csv")
        records.append({"id": pid, "spec": spec_to_dict(spec), "noise_seed": spec.seed + 1})
    truth = {
        "plant": cfg.section("bench")["plant"],
        "rated": cfg.section("bench")["rated"],
        "fault": cfg.section("bench")["fault"],
        "tau_seconds": params.tau,
        "profiles": records,
    }
    atomic_write_text(out / "ground_truth.json", _json(truth))
    return {"profiles": len(records), "healthy_twins": fault is not None}


def cmd_train(cfg: RunConfig, out: Path) -> dict:
    profiles = _profiles(cfg)
    est, report = train_estimator(profiles, cfg.model_kind(), cfg.model_params(), cfg.ewma_specs(), seed=cfg.seed)
    save_model(est, out / "model.json")
    summary = {
        "kind": est.kind,
        "final_loss": report.final_loss,
        "iterations": report.iterations,
        "parameter_count": report.parameter_count,
        "training_profiles": [p.id for p in profiles],
    }
    atomic_write_text(out / "train_report.json", _json(summary))
    history = "epoch,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(map(float, report.history)))
    atomic_write_text(out / "train_history.csv", history)
    atomic_write_text(out / "timing.csv", f"model,train_seconds\n{est.kind},{report.train_seconds:.3f}\n")
    return summary


def cmd_evaluate(cfg: RunConfig, out: Path) -> dict:
    profiles = _profiles(cfg)
    configs = [ModelConfig(m["kind"], dict(m.get("params") or {}), m.get("name") or "") for m in cfg.eval_models()]
    report = leave_one_profile_out(profiles, configs, cfg.ewma_specs(), seed=cfg.seed)
    atomic_write_text(out / "metrics.csv", report.metrics_csv())
    atomic_write_text(out / "timing.csv", report.timing_csv())
    atomic_write_text(out / "histogram.csv", histogram_csv(report, int(cfg.section("eval")["histogram_bins"])))
    atomic_write_text(out / "predictions.csv", report.predictions_csv())
    atomic_write_text(out / "summary.txt", report.summary_text())
    return {m: {"r2": report.aggregate(m).r2, "mae": report.aggregate(m).mae} for m in report.models}


def cmd_search(cfg: RunConfig, out: Path) -> dict:
    profiles = _profiles(cfg)
    search = cfg.section("eval")["search"]
    kind = cfg.model_kind()
    objective = validation_objective(
        profiles, kind, cfg.model_params(), cfg.ewma_specs(), seed=cfg.seed, val_fraction=float(search["val_fraction"])
    )
    best, trials = random_search(cfg.search_space(), int(search["budget"]), objective, seed=cfg.seed)
    atomic_write_text(out / "trials.csv", trials_csv(trials))
    best_params = {**cfg.model_params(), **best}
    best_score = min(t["score"] for t in trials)
    atomic_write_text(out / "best_config.json", _json({"kind": kind, "params": best_params, "validation_mae": best_score}))
    return {"kind": kind, "best": best_params, "validation_mae": best_score}


def cmd_importance(cfg: RunConfig, out: Path) -> dict:
    est = _model(cfg)
    profiles = _profiles(cfg)
    feats = [est.features(p) for p in profiles]
    targets = [p.signal("T_C") for p in profiles]
    n_repeats = int(cfg.section("eval")["importance"]["n_repeats"])
    report = permutation_importance(est.model, feats, targets, n_repeats=n_repeats, seed=cfg.seed)
    atomic_write_text(out / "importance.csv", report.to_csv())
    X = np.vstack([f.values for f in feats])
    corr = correlation_matrix(feats[0].with_values(X), np.concatenate(targets))
    atomic_write_text(out / "correlation.csv", corr.to_csv())
    return {"ranking": report.ranking()[:5], "baseline_mse": report.baseline_mse}


def cmd_monitor(cfg: RunConfig, out: Path) -> dict:
    est = _model(cfg)
    target = _profiles(cfg, "profile")
    m = cfg.section("monitor")
    threshold = m["threshold"]
    calibration = None
    if threshold is None:
        archive = [stream_residuals(est, p) for p in _profiles(cfg, "healthy")]
        threshold = calibrate_threshold(
            archive, float(m["window"]), dt=est.dt, q=float(m["q"]), factor=float(m["factor"]), warmup=float(m["warmup"])
        )
        calibration = {"profiles": len(archive), "q": float(m["q"]), "factor": float(m["factor"])}
    mcfg = cfg.monitor_config(threshold=float(threshold))
    events, per_profile = [], []
    for p in target:
        predicted = est.predict_profile(p)
        found = detect(p.T_C - predicted, mcfg, dt=p.nominal_dt, t0=float(p.t[0]))
        events += [(p.id, e) for e in found]
        name = "residuals.csv" if len(target) == 1 else f"residuals_{p.id}.csv"
        atomic_write_text(out / name, residuals_csv(p, predicted, mcfg.window_samples(p.nominal_dt)))
        per_profile.append({"id": p.id, "alerts": len(found)})
    text = alerts_csv([e for _, e in events])
    if len(target) > 1:
        lines = text.splitlines()
        text = "\n".join(["profile," + lines[0]] + [f"{pid},{line}" for (pid, _), line in zip(events, lines[1:])]) + "\n"
    atomic_write_text(out / "alerts.csv", text)
    result = {"threshold": float(threshold), "calibration": calibration, "profiles": per_profile, "alerts": len(events)}
    atomic_write_text(out / "monitor.json", _json(result))
    for pid, e in events:
        print(f"{pid}: {e.summary()}")
    return result


HANDLERS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "search": cmd_search,
    "importance": cmd_importance,
    "monitor": cmd_monitor,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drivetwin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.replace("cmd_", "") + " stage")
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="overrides io.seed")
        p.add_argument("--out", help="output directory (overrides io.out)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="config override, repeatable")
        p.add_argument("--data", help="profile CSV or directory (io.data)")
        p.add_argument("--model", help="model file (io.model)")
        p.add_argument("--profile", help="monitored profile CSV or directory (io.profile)")
        p.add_argument("--healthy", help="healthy profiles for threshold calibration (io.healthy)")
    return parser


def _overrides(args) -> list:
    items = [parse_override(s) for s in args.set]
    for flag in ("seed", "out", "data", "model", "profile", "healthy"):
        value = getattr(args, flag)
        if value is not None:
            items.append((("io", flag), value))
    return items


def _error_line(exc: BaseException) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("section", "key", "path"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload[attr] = value
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = RunConfig.load(args.config, _overrides(args))
        out = Path(cfg.section("io")["out"])
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "config.yaml", cfg.to_yaml())
        result = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    except (DriveTwinError, ValueError, OSError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "out": str(out), "result": result}, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
