import pytest

from drivetwin.config import DEFAULTS, RunConfig, parse_override
from drivetwin.errors import ArtifactError, ConfigError
from drivetwin.monitor import MonitorConfig
from drivetwin.testbench import PlantParams


def test_defaults_resolve():
    cfg = RunConfig.resolve()
    assert cfg.seed == 0
    assert cfg.model_kind() == "mlp"
    assert cfg.plant_params() == PlantParams()
    assert cfg.fault_spec() is None
    assert len(cfg.profile_specs()) == 17
    assert len(cfg.ewma_specs()) == 8


def test_unknown_key_names_section_and_key():
    with pytest.raises(ConfigError) as info:
        RunConfig.resolve({"monitor": {"windw": 10}})
    assert info.value.section == "monitor"
    assert info.value.key == "windw"
    assert "[monitor]" in str(info.value) and "windw" in str(info.value)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="nonsense"):
        RunConfig.resolve({"nonsense": {}})


def test_overrides_apply_in_order():
    raw = {"monitor": {"window": 120}}
    cfg = RunConfig.resolve(raw, [parse_override("monitor.window=60"), parse_override("io.seed=7")])
    assert cfg.section("monitor")["window"] == 60
    assert cfg.seed == 7
    assert DEFAULTS["io"]["seed"] == 0


def test_override_values_are_yaml():
    assert parse_override("model.params={epochs: 3}") == (("model", "params"), {"epochs": 3})
    assert parse_override("monitor.threshold=null") == (("monitor", "threshold"), None)
    with pytest.raises(ConfigError):
        parse_override("noequals")
    with pytest.raises(ConfigError):
        parse_override("seed=1")


def test_hyperparameter_names_checked():
    with pytest.raises(ConfigError) as info:
        RunConfig.resolve({"model": {"kind": "mlp", "params": {"epochz": 3}}})
    assert info.value.section == "model"
    with pytest.raises(ConfigError):
        RunConfig.resolve({"model": {"kind": "forest"}})


def test_fault_and_monitor_views():
    cfg = RunConfig.resolve({"bench": {"fault": {"t_fault": 10800, "r_multiplier": 1.5}}, "monitor": {"window": 60}})
    assert cfg.fault_spec().t_fault == 10800.0
    m = cfg.monitor_config(threshold=2.5)
    assert isinstance(m, MonitorConfig) and m.window == 60 and m.threshold == 2.5
    with pytest.raises(ConfigError):
        RunConfig.resolve({"bench": {"fault": {"t_fault": 0, "oops": 1}}}).fault_spec()


def test_explicit_profiles():
    cfg = RunConfig.resolve({"bench": {"profiles": [{"id": "a", "template": "static", "duration": 120}]}})
    ((pid, spec),) = cfg.profile_specs()
    assert pid == "a" and spec.duration == 120.0


def test_load_yaml_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("io:\n  seed: 3\nmodel:\n  kind: elastic_net\n")
    cfg = RunConfig.load(path)
    assert cfg.seed == 3 and cfg.model_kind() == "elastic_net"


def test_resolved_yaml_round_trips(tmp_path):
    cfg = RunConfig.resolve({"io": {"seed": 4}})
    path = tmp_path / "c.yaml"
    path.write_text(cfg.to_yaml())
    assert RunConfig.load(path).data == cfg.data


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(ArtifactError, match="nope.yaml"):
        RunConfig.load(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("io: [unclosed\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)
