import json
import shutil
import subprocess
import sys

import pytest

from drivetwin.cli import main
from drivetwin.telemetry import read_profile_csv

# files whose content includes wall-clock timings
TIMED = {"timing.csv", "summary.txt"}

HEAVY = ["--set", "bench.template=heavy-duty"]


def run(*argv):
    return main([str(a) for a in argv])


def last_json(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_simulate_small_bench(tmp_path, capsys):
    rc = run("simulate", "--out", tmp_path, "--set", "bench.n_profiles=2", "--set", "bench.duration=60")
    assert rc == 0
    assert last_json(capsys)["result"]["profiles"] == 2
    files = sorted((tmp_path / "profiles").glob("*.csv"))
    assert [f.name for f in files] == ["profile_00.csv", "profile_01.csv"]
    assert all(len(read_profile_csv(f)) == 60 for f in files)
    truth = json.loads((tmp_path / "ground_truth.json").read_text())
    assert truth["fault"] is None and len(truth["profiles"]) == 2
    assert (tmp_path / "config.yaml").is_file()
    assert not (tmp_path / "twin").exists()


def pipeline(root):
    bench = ["--set", "bench.n_profiles=3", "--set", "bench.duration=600"]
    en_only = ["--set", "eval.models=[{kind: elastic_net}]", "--set", "model.kind=elastic_net"]
    assert run("simulate", "--out", root / "sim", *bench) == 0
    data = root / "sim" / "profiles"
    assert run("train", "--data", data, "--out", root / "train", *en_only) == 0
    assert run("evaluate", "--data", data, "--out", root / "eval", *en_only) == 0
    assert run("importance", "--data", data, "--model", root / "train" / "model.json", "--out", root / "imp",
               "--set", "eval.importance.n_repeats=2") == 0
    assert run("search", "--data", data, "--out", root / "search", "--set", "eval.search.budget=2", *en_only) == 0


def test_repeated_runs_are_byte_identical(tmp_path):
    root = tmp_path / "run"
    pipeline(root)
    a = snapshot(root)
    shutil.rmtree(root)
    pipeline(root)
    b = snapshot(root)
    assert a.keys() == b.keys()
    for name in a:
        if name.rsplit("/", 1)[-1] in TIMED:
            continue
        assert a[name] == b[name], name
    for name in ("eval/metrics.csv", "eval/histogram.csv", "eval/predictions.csv", "train/model.json",
                 "imp/importance.csv", "imp/correlation.csv", "search/trials.csv", "search/best_config.json"):
        assert name in a
    assert a["eval/metrics.csv"].decode().count("\n") == 5


def test_unknown_config_key_is_a_json_error(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("monitor:\n  windw: 3\n")
    rc = run("simulate", "--config", cfg, "--out", tmp_path / "o")
    assert rc == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError"
    assert err["section"] == "monitor" and err["key"] == "windw"


def test_missing_artifact_names_path(tmp_path, capsys):
    missing = tmp_path / "no_model.json"
    rc = run("monitor", "--model", missing, "--profile", tmp_path, "--out", tmp_path / "o")
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ArtifactError"
    assert err["path"] == str(missing)


def test_missing_data_directory(tmp_path, capsys):
    rc = run("train", "--data", tmp_path / "nothing", "--out", tmp_path / "o")
    assert rc == 1
    assert "nothing" in json.loads(capsys.readouterr().err)["message"]


def test_required_input_missing(tmp_path, capsys):
    assert run("train", "--out", tmp_path) == 2
    assert json.loads(capsys.readouterr().err)["key"] == "data"


def test_bad_usage_exit_code(capsys):
    assert run("fly") == 2


def test_resolved_config_written(tmp_path):
    run("simulate", "--out", tmp_path, "--seed", 5, "--set", "bench.n_profiles=2", "--set", "bench.duration=10")
    text = (tmp_path / "config.yaml").read_text()
    assert "seed: 5" in text and "n_profiles: 2" in text


def test_monitor_alerts_after_fault(tmp_path, capsys):
    fault = "bench.fault={t_fault: 10800, r_multiplier: 1.5, ambient_coupling: 0.2}"
    assert run("simulate", "--out", tmp_path / "train", "--set", "bench.n_profiles=4",
               "--set", "bench.duration=7200", *HEAVY) == 0
    assert run("simulate", "--out", tmp_path / "field", "--seed", 9, "--set", "bench.n_profiles=1",
               "--set", "bench.duration=18000", "--set", fault, *HEAVY) == 0
    assert run("train", "--data", tmp_path / "train" / "profiles", "--out", tmp_path / "m",
               "--set", "model.kind=elastic_net") == 0
    model = tmp_path / "m" / "model.json"
    capsys.readouterr()
    assert run("monitor", "--model", model, "--profile", tmp_path / "field" / "profiles", "--out", tmp_path / "mon",
               "--set", "monitor.threshold=2.0") == 0
    out = capsys.readouterr().out
    assert "ALERT under-prediction" in out
    result = json.loads(out.strip().splitlines()[-1])["result"]
    assert result["alerts"] >= 1
    rows = (tmp_path / "mon" / "alerts.csv").read_text().strip().splitlines()[1:]
    assert all(float(r.split(",")[1]) > 10800 for r in rows)
    assert (tmp_path / "mon" / "residuals.csv").is_file()
    assert run("monitor", "--model", model, "--profile", tmp_path / "field" / "twin", "--out", tmp_path / "twin",
               "--set", "monitor.threshold=2.0") == 0
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["result"]["alerts"] == 0


def test_monitor_calibrates_from_healthy_archive(tmp_path, capsys):
    run("simulate", "--out", tmp_path / "sim", "--set", "bench.n_profiles=3", "--set", "bench.duration=3600", *HEAVY)
    data = tmp_path / "sim" / "profiles"
    run("train", "--data", data, "--out", tmp_path / "m", "--set", "model.kind=elastic_net")
    capsys.readouterr()
    rc = run("monitor", "--model", tmp_path / "m" / "model.json", "--profile", data, "--healthy", data,
             "--out", tmp_path / "mon", "--set", "monitor.warmup=600")
    assert rc == 0
    result = last_json(capsys)["result"]
    assert result["calibration"]["profiles"] == 3 and result["threshold"] > 0
    assert len(result["profiles"]) == 3
    assert (tmp_path / "mon" / "residuals_profile_00.csv").is_file()


@pytest.mark.slow
def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "drivetwin.cli", "simulate", "--out", str(tmp_path), "--set", "bench.n_profiles=2",
         "--set", "bench.duration=5"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["command"] == "simulate"
