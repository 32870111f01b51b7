import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from drivetwin.errors import ConfigError, SchemaError, ThresholdError
from drivetwin.monitor import (
    MonitorConfig,
    ResidualMonitor,
    alerts_csv,
    calibrate_threshold,
    detect,
    rolling_mean,
    stream_residuals,
)
from drivetwin.testbench import FaultSpec, generate_profile, simulate_plant, template_spec

from conftest import make_profile

STEP_CFG = MonitorConfig(window=60.0, threshold=2.0, persistence=60.0, warmup=0.0)


def step(n=2000, at=1000, size=5.0):
    return np.where(np.arange(n) >= at, size, 0.0)


def test_step_gives_one_alert_after_persistence():
    events = detect(step(), STEP_CFG)
    assert len(events) == 1
    e = events[0]
    assert e.direction == "under"
    assert e.detect_t - e.onset_t == 60.0
    # the 60 s mean first exceeds 2 once 25 of its samples sit at +5
    assert e.onset_t == 1024.0
    assert e.peak == pytest.approx(5.0)


def test_negative_step_is_over_prediction():
    (e,) = detect(-step(), STEP_CFG)
    assert e.direction == "over"


def test_single_spike_is_ignored():
    r = np.zeros(2000)
    r[1000] = 100.0
    assert detect(r, STEP_CFG) == []


def test_short_excursion_below_persistence():
    r = np.zeros(3000)
    r[1000:1030] = 5.0
    # the 60 s mean stays above 2 from t=1024 to t=1064 only
    m = rolling_mean(r, 60)
    assert np.flatnonzero(m > 2.0).tolist() == list(range(1024, 1065))
    assert detect(r, STEP_CFG) == []


def test_warmup_suppresses_early_alerts():
    r = np.full(2000, 5.0)
    cfg = MonitorConfig(window=60.0, threshold=2.0, persistence=60.0, warmup=1800.0)
    (e,) = detect(r, cfg)
    assert e.onset_t == 1800.0 and e.detect_t == 1860.0
    assert detect(r[:1850], cfg) == []


def test_sustained_excess_alerts_once():
    r = np.concatenate([np.zeros(500), np.full(5000, 4.0)])
    assert len(detect(r, STEP_CFG)) == 1


def test_time_origin_and_dt():
    events = detect(step(200, 100), MonitorConfig(window=60.0, threshold=2.0, persistence=60.0, warmup=0.0), dt=10.0, t0=500.0)
    (e,) = events
    # 6-sample window: mean > 2 needs 3 samples at +5
    assert e.onset_t == 500.0 + 102 * 10.0
    assert e.detect_t == e.onset_t + 60.0


def test_rolling_mean_is_trailing():
    np.testing.assert_allclose(rolling_mean([1.0, 2.0, 3.0, 4.0], 2), [1.0, 1.5, 2.5, 3.5])


@given(st.integers(0, 2**31), st.lists(st.integers(1, 400), min_size=1, max_size=20))
def test_chunked_stream_matches_full(seed, chunks):
    rng = np.random.default_rng(seed)
    n = 3000
    r = rng.normal(0, 1, n) + np.where(np.arange(n) > rng.integers(0, n), rng.uniform(-4, 4), 0.0)
    cfg = MonitorConfig(window=30.0, threshold=1.0, persistence=20.0, warmup=100.0)
    full = detect(r, cfg)
    mon = ResidualMonitor(cfg)
    got, pos = [], 0
    for c in chunks * (n // sum(chunks) + 1):
        got += mon.update(r[pos : pos + c])
        pos += c
        if pos >= n:
            break
    assert got == full


def test_calibration_matches_gaussian_quantile():
    rng = np.random.default_rng(0)
    sigma, window, q = 0.5, 60, 0.99
    archive = [rng.normal(0, sigma, 50_000) for _ in range(4)]
    got = calibrate_threshold(archive, window, q=q, factor=1.0, warmup=window)
    expected = sigma / np.sqrt(window) * norm.ppf((1 + q) / 2)
    assert got == pytest.approx(expected, rel=0.05)
    assert calibrate_threshold(archive, window, q=q, factor=1.5, warmup=window) == pytest.approx(1.5 * got)


def test_calibration_accepts_single_series():
    r = np.random.default_rng(1).normal(size=5000)
    assert calibrate_threshold(r, 60.0) == calibrate_threshold([r], 60.0)


def test_calibration_errors():
    with pytest.raises(ThresholdError):
        calibrate_threshold([np.zeros(100)], 10.0)
    with pytest.raises(ThresholdError):
        calibrate_threshold([np.ones(100)], 10.0, q=0.0)
    with pytest.raises(ThresholdError):
        calibrate_threshold([np.ones(100)], 10.0, warmup=200.0)
    with pytest.raises(ConfigError):
        calibrate_threshold([np.ones(100)], 0.5)


def test_window_shorter_than_sample_period():
    cfg = MonitorConfig(window=5.0, threshold=1.0)
    with pytest.raises(ConfigError):
        detect(np.zeros(10), cfg, dt=10.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        MonitorConfig(threshold=0.0)
    with pytest.raises(ConfigError):
        MonitorConfig(persistence=-1.0)


class _TwinOf:
    """Stand-in estimator that replays a fixed prediction."""

    def __init__(self, pred):
        self.pred = pred

    def predict_profile(self, profile):
        return self.pred


def test_stream_residuals_sign_and_target():
    p = make_profile(20)
    r = stream_residuals(_TwinOf(p.T_C - 1.0), p)
    np.testing.assert_allclose(r, 1.0)
    with pytest.raises(SchemaError):
        stream_residuals(_TwinOf(None), make_profile(5, target=False))


def first_detection(r_multiplier, seed):
    freq, load, amb = generate_profile(template_spec("heavy-duty", 4 * 3600.0, seed=seed))
    healthy = simulate_plant(freq, load, amb, noise=False)
    faulty = simulate_plant(freq, load, amb, fault=FaultSpec(3600.0, r_multiplier, 0.0), noise=False)
    cfg = MonitorConfig(window=300.0, threshold=1.0, persistence=120.0, warmup=1800.0)
    events = detect(faulty.T_C - healthy.T_C, cfg)
    return events[0].detect_t if events else np.inf


@given(st.floats(1.2, 2.0), st.floats(0.0, 1.0), st.integers(0, 50))
def test_stronger_fault_is_not_detected_later(r1, extra, seed):
    assert first_detection(r1 + extra, seed) <= first_detection(r1, seed)


def test_alerts_csv_header():
    assert alerts_csv(detect(step(), STEP_CFG)).splitlines()[0] == "onset_t,detect_t,peak,direction"


def test_all_zero_residuals():
    assert detect(np.zeros(5000), STEP_CFG) == []


def test_perfect_model_gives_zero_residuals():
    freq, load, amb = generate_profile(template_spec("dynamic", 1800.0, seed=1))
    plant = simulate_plant(freq, load, amb, noise=False)
    r = stream_residuals(_TwinOf(simulate_plant(freq, load, amb, noise=False).T_C), plant)
    np.testing.assert_array_equal(r, 0.0)


@given(st.integers(0, 2**31), st.floats(0.0, 2000.0))
def test_no_alert_inside_warmup(seed, warmup):
    r = np.random.default_rng(seed).normal(3.0, 2.0, 2500)
    cfg = MonitorConfig(window=10.0, threshold=1.0, persistence=0.0, warmup=warmup)
    assert all(e.onset_t >= warmup and e.detect_t >= e.onset_t for e in detect(r, cfg))
