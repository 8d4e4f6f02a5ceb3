import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symflood.core import (
    ConfigError,
    SimConfig,
    Waveform,
    dbm_to_watts,
    derive_seed,
    load_config,
    make_rng,
    save_config,
    validate_config,
    watts_to_dbm,
)


def test_noise_floor_in_watts():
    assert dbm_to_watts(-103) == pytest.approx(5.0119e-14, rel=1e-4)


def test_zero_dbm_is_one_milliwatt():
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)


def test_nonpositive_power_rejected():
    with pytest.raises(ValueError):
        watts_to_dbm(0.0)


@given(st.floats(min_value=-200, max_value=60))
def test_dbm_round_trip(p):
    assert watts_to_dbm(dbm_to_watts(p)) == pytest.approx(p, abs=1e-9)


def test_defaults_and_derived_quantities(cfg):
    validate_config(cfg)
    assert cfg.data_rate_bps == pytest.approx(100e3)
    assert cfg.buffer_duration_s == pytest.approx(1.875e-6 / 18)
    assert (cfg.symbol_samples, cfg.window_samples, cfg.buffer_samples) == (960, 180, 10)
    assert cfg.rx_noise_dbm == pytest.approx(-98.0)
    assert cfg.threshold_amplitude == pytest.approx(1e-6)


def test_violations_name_field_pairs():
    bad = SimConfig(pulse_duration_Tp_s=2e-6, window_L_s=20e-6, baseband_sample_rate_hz=15e6)
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    text = " ".join(err.value.violations)
    assert "pulse_duration_Tp_s/symbol_interval_Ts_s" in text
    assert "window_L_s/symbol_interval_Ts_s" in text
    assert "baseband_sample_rate_hz/signal_bandwidth_hz" in text
    assert len(err.value.violations) >= 3


@given(st.floats(min_value=1e-9, max_value=5e-6))
def test_pulse_duration_rule(tp):
    cfg = SimConfig(pulse_duration_Tp_s=tp)
    try:
        validate_config(cfg)
        flagged = False
    except ConfigError as exc:
        flagged = any(v.startswith("pulse_duration_Tp_s") for v in exc.violations)
    assert flagged == (tp > cfg.symbol_interval_Ts_s / 10)


def test_buffers_must_fit_in_window():
    with pytest.raises(ConfigError, match="buffer_duration_s/window_L_s"):
        validate_config(SimConfig(buffer_duration_s=2 * 1.875e-6 / 18))


def test_off_grid_buffer_rejected():
    with pytest.raises(ConfigError):
        validate_config(SimConfig(detections_per_window=7))


def test_yaml_round_trip(tmp_path, cfg):
    c = cfg.with_(tx_power_dbm=-3.0, reflections_enabled=True)
    save_config(c, tmp_path / "c.yaml")
    assert load_config(tmp_path / "c.yaml") == c


def test_yaml_rejects_unknown_key(tmp_path):
    (tmp_path / "c.yaml").write_text("bogus: 1\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.yaml")


def test_yaml_rejects_inconsistent_rate(tmp_path):
    (tmp_path / "c.yaml").write_text("data_rate_bps: 50000\n")
    with pytest.raises(ConfigError, match="data_rate_bps"):
        load_config(tmp_path / "c.yaml")


def test_config_hash_tracks_content(cfg):
    assert cfg.config_hash() == SimConfig().config_hash()
    assert cfg.config_hash() != cfg.with_(rng_seed=1).config_hash()


@given(st.integers(0, 2**62), st.lists(st.integers(0, 1000), max_size=3))
def test_derive_seed_is_stable_and_bounded(seed, path):
    a = derive_seed(seed, *path)
    assert a == derive_seed(seed, *path)
    assert 0 <= a < 2**63


def test_derive_seed_children_differ():
    kids = {derive_seed(7, 5, k) for k in range(1000)}
    assert len(kids) == 1000


def test_make_rng_streams_independent():
    a = make_rng(1, 2).standard_normal(4)
    b = make_rng(1, 3).standard_normal(4)
    assert not np.allclose(a, b)
    assert np.allclose(a, make_rng(1, 2).standard_normal(4))


def test_waveform_is_read_only_and_timed():
    w = Waveform(np.ones(4), 4.0, 1.0)
    assert w.samples.dtype == np.complex128
    assert w.end_time_s == pytest.approx(2.0)
    assert np.allclose(w.times, [1.0, 1.25, 1.5, 1.75])
    with pytest.raises(ValueError):
        w.samples[0] = 0
    assert w.energy() == pytest.approx(1.0)
    assert w.peak_power_w() == pytest.approx(1.0)


def test_waveform_rejects_empty():
    with pytest.raises(ValueError):
        Waveform(np.zeros(0), 1.0)
    with pytest.raises(ValueError):
        Waveform(np.zeros(3), 0.0)


def test_amplitude_convention():
    # |s|^2 in watts: a 1 mW carrier has amplitude sqrt(1e-3)
    w = Waveform(np.full(10, math.sqrt(1e-3)), 1e6)
    assert watts_to_dbm(w.peak_power_w()) == pytest.approx(0.0)
