"""Model evaluation: metrics, leave-one-profile-out CV, random search, correlation and importance."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .fileio import atomic_write_text
from .features import DEFAULT_EWMA_SPECS, expand_features, specs_from_config
from .models import fit_model
from .telemetry import Profile, apply_scaler, fit_scaler

AGGREGATE = "aggregate"
METRIC_FIELDS = ("mse", "mae", "r2", "linf")


@dataclass
class FoldMetrics:
    model: str
    fold: str
    mse: float
    mae: float
    r2: float
    linf: float
    r2_defined: bool = True
    n_samples: int = 0
    parameter_count: int = 0
    train_seconds: float = 0.0
    infer_seconds: float = 0.0


def compute_metrics(y, y_hat, model: str = "", fold: str = "") -> FoldMetrics:
    """MSE, MAE, R^2 and max-abs error of ``y_hat`` against ``y``.

    R^2 is NaN with ``r2_defined=False`` when ``y`` has zero variance.
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.ndim != 1 or y.size == 0:
        raise ValueError(f"need equal non-zero lengths, got {y.shape} and {y_hat.shape}")
    e = y - y_hat
    sse = float(np.dot(e, e))
    sst = float(np.sum((y - y.mean()) ** 2))
    defined = sst > 0
    return FoldMetrics(
        model=model,
        fold=fold,
        mse=sse / y.size,
        mae=float(np.mean(np.abs(e))),
        r2=1.0 - sse / sst if defined else math.nan,
        linf=float(np.max(np.abs(e))),
        r2_defined=defined,
        n_samples=int(y.size),
    )


@dataclass
class ModelConfig:
    kind: str
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not self.name:
            self.name = self.kind


@dataclass
class FoldPrediction:
    model: str
    fold: str
    t: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)
    predictions: list = field(default_factory=list)
    scalers: dict = field(default_factory=dict)  # fold -> ScalerState

    @property
    def models(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.model not in seen:
                seen.append(r.model)
        return seen

    def folds(self, model: str) -> list[FoldMetrics]:
        return [r for r in self.rows if r.model == model]

    def aggregate(self, model: str) -> FoldMetrics:
        """Mean of the per-fold rows; R^2 averages the folds where it is defined."""
        rows = self.folds(model)
        if not rows:
            raise KeyError(model)
        r2s = [r.r2 for r in rows if r.r2_defined]
        return FoldMetrics(
            model=model,
            fold=AGGREGATE,
            mse=float(np.mean([r.mse for r in rows])),
            mae=float(np.mean([r.mae for r in rows])),
            r2=float(np.mean(r2s)) if r2s else math.nan,
            linf=float(np.mean([r.linf for r in rows])),
            r2_defined=len(r2s) == len(rows),
            n_samples=int(sum(r.n_samples for r in rows)),
            parameter_count=int(np.mean([r.parameter_count for r in rows])),
            train_seconds=float(np.mean([r.train_seconds for r in rows])),
            infer_seconds=float(np.mean([r.infer_seconds for r in rows])),
        )

    def table(self) -> list[FoldMetrics]:
        out = []
        for m in self.models:
            out += self.folds(m) + [self.aggregate(m)]
        return out

    def errors(self, model: str) -> np.ndarray:
        return np.concatenate([p.y - p.y_hat for p in self.predictions if p.model == model])

    def metrics_csv(self) -> str:
        """Accuracy and size columns; deterministic for a fixed seed."""
        header = ["model", "fold", "n_samples", "mse", "mae", "r2", "linf", "r2_defined", "parameters"]
        rows = [
            [r.model, r.fold, r.n_samples, _num(r.mse), _num(r.mae), _num(r.r2), _num(r.linf), int(r.r2_defined),
             r.parameter_count]
            for r in self.table()
        ]
        return _csv_text(header, rows)

    def timing_csv(self) -> str:
        """Wall-clock columns, kept apart because they differ between runs."""
        header = ["model", "fold", "train_seconds", "infer_seconds"]
        rows = [[r.model, r.fold, f"{r.train_seconds:.3f}", f"{r.infer_seconds:.3f}"] for r in self.table()]
        return _csv_text(header, rows)

    def predictions_csv(self) -> str:
        header = ["model", "fold", "t", "measured", "predicted", "error"]
        rows = []
        for p in self.predictions:
            for t, y, yh in zip(p.t, p.y, p.y_hat):
                rows.append([p.model, p.fold, _num(t), _num(y), _num(yh), _num(y - yh)])
        return _csv_text(header, rows)

    def summary_text(self) -> str:
        lines = [f"{'model':<14}{'MSE':>9}{'MAE':>9}{'R2':>8}{'linf':>9}{'train s':>10}{'infer s':>10}{'params':>9}"]
        for m in self.models:
            a = self.aggregate(m)
            lines.append(
                f"{m:<14}{a.mse:>9.3f}{a.mae:>9.3f}{a.r2:>8.3f}{a.linf:>9.2f}"
                f"{a.train_seconds:>10.3f}{a.infer_seconds:>10.3f}{a.parameter_count:>9d}"
            )
        return "\n".join(lines) + "\n"


def _num(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_text(path, text: str) -> None:
    atomic_write_text(path, text)


def _as_model_configs(model_config) -> list[ModelConfig]:
    if isinstance(model_config, ModelConfig):
        return [model_config]
    if isinstance(model_config, str):
        return [ModelConfig(model_config)]
    if isinstance(model_config, Mapping):
        return [ModelConfig(**model_config)]
    return [c if isinstance(c, ModelConfig) else ModelConfig(**c) for c in model_config]


def leave_one_profile_out(
    dataset: Sequence[Profile],
    model_config,
    ewma_specs=DEFAULT_EWMA_SPECS,
    seed: int = 0,
    keep_predictions: bool = True,
    progress: Optional[Callable[[str], None]] = None,
) -> MetricsReport:
    """Hold each profile out once; fit scaler and model on the others only.

    ``model_config`` is one ModelConfig (or kind string / dict) or a list of them.
    Folds run in dataset order, models in the given order.
    """
    if len(dataset) < 2:
        raise ValueError("leave-one-profile-out needs at least two profiles")
    configs = _as_model_configs(model_config)
    specs = specs_from_config(ewma_specs)
    feats = [expand_features(p, specs) for p in dataset]
    report = MetricsReport()
    for i, held in enumerate(dataset):
        train_idx = [j for j in range(len(dataset)) if j != i]
        scaler = fit_scaler([feats[j] for j in train_idx])
        report.scalers[held.id] = scaler
        data = [(apply_scaler(scaler, feats[j]).values, dataset[j].signal("T_C")) for j in train_idx]
        X_test = apply_scaler(scaler, feats[i]).values
        for cfg in configs:
            t0 = time.perf_counter()
            model, rep = fit_model(cfg.kind, data, cfg.params, seed=seed)
            train_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            y_hat = model.predict(X_test)
            infer_s = time.perf_counter() - t0
            row = compute_metrics(held.signal("T_C"), y_hat, model=cfg.name, fold=held.id)
            row.parameter_count = rep.parameter_count
            row.train_seconds = train_s
            row.infer_seconds = infer_s
            report.rows.append(row)
            if keep_predictions:
                report.predictions.append(FoldPrediction(cfg.name, held.id, held.t, held.signal("T_C"), y_hat))
            if progress:
                progress(f"fold {held.id} {cfg.name}: r2={row.r2:.4f} mae={row.mae:.3f} train={train_s:.1f}s")
    return report


def error_histogram(errors, bins: int = 60, value_range: Optional[tuple] = None) -> list[tuple]:
    """(bin_lo, bin_hi, count, density) rows of an error distribution."""
    errors = np.asarray(errors, dtype=float)
    if value_range is None:
        lim = float(np.max(np.abs(errors))) if errors.size else 1.0
        value_range = (-lim, lim) if lim > 0 else (-1.0, 1.0)
    counts, edges = np.histogram(errors, bins=bins, range=value_range)
    density, _ = np.histogram(errors, bins=bins, range=value_range, density=True)
    return [(float(edges[k]), float(edges[k + 1]), int(counts[k]), float(density[k])) for k in range(bins)]


def histogram_csv(report: MetricsReport, bins: int = 60) -> str:
    rows = []
    errors = {m: report.errors(m) for m in report.models}
    lim = max((float(np.max(np.abs(e))) for e in errors.values() if e.size), default=1.0)
    for m, e in errors.items():
        for lo, hi, count, dens in error_histogram(e, bins, (-lim, lim)):
            rows.append([m, _num(lo), _num(hi), count, _num(dens)])
    return _csv_text(["model", "bin_lo", "bin_hi", "count", "density"], rows)


# --- hyperparameter search -------------------------------------------------


def _sample(spec, rng: np.random.Generator):
    if isinstance(spec, Mapping):
        if len(spec) != 1:
            raise ConfigError(f"search range must have exactly one key, got {dict(spec)}")
        (how, arg), = spec.items()
        if how == "log_uniform":
            lo, hi = arg
            if not 0 < lo <= hi:
                raise ConfigError("log_uniform bounds must satisfy 0 < lo <= hi")
            return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        if how == "uniform":
            lo, hi = arg
            return float(rng.uniform(lo, hi))
        if how == "int":
            lo, hi = arg
            return int(rng.integers(lo, hi + 1))
        if how == "choice":
            return arg[int(rng.integers(len(arg)))]
        raise ConfigError(f"unknown search range type {how!r}")
    return spec


def random_search(
    space: Mapping,
    budget: int,
    objective: Callable[[dict], float],
    seed: int = 0,
) -> tuple[dict, list[dict]]:
    """Draw ``budget`` configurations from ``space`` and return the argmin of ``objective``.

    Range forms: ``{"log_uniform": [lo, hi]}``, ``{"uniform": [lo, hi]}``,
    ``{"int": [lo, hi]}``, ``{"choice": [...]}``; any other value is fixed.
    Ties keep the earliest trial.
    """
    if not space:
        raise ConfigError("search space is empty")
    if budget < 1:
        raise ConfigError("search budget must be >= 1")
    rng = np.random.default_rng(seed)
    trials = []
    best = None
    for k in range(budget):
        config = {name: _sample(spec, rng) for name, spec in space.items()}
        score = float(objective(dict(config)))
        trials.append({"trial": k, "score": score, "config": config})
        if best is None or score < best["score"]:
            best = trials[-1]
    return dict(best["config"]), trials


def trials_csv(trials: list[dict]) -> str:
    names = sorted({n for t in trials for n in t["config"]})
    rows = [[t["trial"], _num(t["score"])] + [json.dumps(t["config"].get(n)) for n in names] for t in trials]
    return _csv_text(["trial", "validation_mae"] + names, rows)


def temporal_split(n: int, val_fraction: float) -> int:
    """Index where the validation tail of an ``n``-row profile starts."""
    if not 0 < val_fraction < 1:
        raise ConfigError("validation fraction must lie in (0, 1)")
    return max(1, min(n - 1, int(round(n * (1.0 - val_fraction)))))


def validation_objective(
    dataset: Sequence[Profile],
    kind: str,
    base_params: Optional[dict] = None,
    ewma_specs=DEFAULT_EWMA_SPECS,
    seed: int = 0,
    val_fraction: float = 0.2,
) -> Callable[[dict], float]:
    """Objective for :func:`random_search`: MAE on the last ``val_fraction`` of every profile.

    Models and scaler see only the leading part of each profile; features are
    causal, so the validation tail uses history but never leaks into training.
    """
    specs = specs_from_config(ewma_specs)
    feats = [expand_features(p, specs) for p in dataset]
    cuts = [temporal_split(len(p), val_fraction) for p in dataset]
    scaler = fit_scaler([f.values[:c] for f, c in zip(feats, cuts)])
    scaled = [apply_scaler(scaler, f).values for f in feats]
    targets = [p.signal("T_C") for p in dataset]
    train = [(X[:c], y[:c]) for X, y, c in zip(scaled, targets, cuts)]

    def objective(config: dict) -> float:
        params = dict(base_params or {})
        params.update(config)
        model, _ = fit_model(kind, train, params, seed=seed)
        errs = [np.abs(model.predict(X)[c:] - y[c:]) for X, y, c in zip(scaled, targets, cuts)]
        return float(np.mean(np.concatenate(errs)))

    return objective


# --- feature screening ------------------------------------------------------


@dataclass
class CorrelationReport:
    names: list
    matrix: np.ndarray
    undefined: list  # names of zero-variance columns

    def to_csv(self) -> str:
        rows = [[n] + [_num(v) for v in row] for n, row in zip(self.names, self.matrix)]
        return _csv_text([""] + self.names, rows)


def correlation_matrix(X, y, target_name: str = "T_C") -> CorrelationReport:
    """Pearson correlations among the feature columns and the target (last row/column)."""
    values = np.asarray(getattr(X, "values", X), dtype=float)
    names = list(getattr(X, "names", [f"x{j}" for j in range(values.shape[1])])) + [target_name]
    data = np.column_stack([values, np.asarray(y, dtype=float)])
    if data.shape[0] < 2:
        raise ValueError("correlation needs at least two rows")
    centered = data - data.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    zero = norms == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (centered.T @ centered) / np.outer(norms, norms)
    corr = np.clip(corr, -1.0, 1.0)
    corr[zero, :] = np.nan
    corr[:, zero] = np.nan
    np.fill_diagonal(corr, np.where(zero, np.nan, 1.0))
    return CorrelationReport(names, corr, [n for n, z in zip(names, zero) if z])


@dataclass
class ImportanceReport:
    names: list
    importance: np.ndarray
    std: np.ndarray
    baseline_mse: float

    def ranking(self) -> list[str]:
        order = sorted(range(len(self.names)), key=lambda j: -self.importance[j])
        return [self.names[j] for j in order]

    def to_csv(self) -> str:
        rows = [
            [rank + 1, self.names[j], _num(self.importance[j]), _num(self.std[j])]
            for rank, j in enumerate(sorted(range(len(self.names)), key=lambda j: -self.importance[j]))
        ]
        return _csv_text(["rank", "feature", "importance_mse_increase", "std"], rows)


def permutation_importance(model, X, y, n_repeats: int = 5, seed: int = 0) -> ImportanceReport:
    """Mean increase in MSE when one column is shuffled.

    ``X``/``y`` may be a single profile or lists of per-profile arrays; each
    column is permuted over time within its own profile, which is also what
    sequence models need.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    Xs = X if isinstance(X, (list, tuple)) else [X]
    ys = y if isinstance(y, (list, tuple)) else [y]
    names = list(getattr(Xs[0], "names", [f"x{j}" for j in range(np.shape(getattr(Xs[0], "values", Xs[0]))[1])]))
    Xs = [np.array(getattr(x, "values", x), dtype=float) for x in Xs]
    ys = [np.asarray(v, dtype=float) for v in ys]
    y_all = np.concatenate(ys)

    def mse(arrays):
        pred = np.concatenate([model.predict(a) for a in arrays])
        return float(np.mean((y_all - pred) ** 2))

    base = mse(Xs)
    rng = np.random.default_rng(seed)
    n_cols = Xs[0].shape[1]
    imp = np.zeros(n_cols)
    std = np.zeros(n_cols)
    for j in range(n_cols):
        scores = []
        for _ in range(n_repeats):
            shuffled = []
            for a in Xs:
                b = a.copy()
                b[:, j] = a[rng.permutation(len(a)), j]
                shuffled.append(b)
            scores.append(mse(shuffled) - base)
        imp[j] = np.mean(scores)
        std[j] = np.std(scores)
    return ImportanceReport(names, imp, std, base)
