"""Shared configuration, unit helpers and the seed-splitting contract.

Power convention used everywhere in the package: a complex-baseband sample
``s`` carries instantaneous power ``|s|**2`` watts.  Thresholds, noise
variances and transmit amplitudes are all derived from that one rule.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

SPEED_OF_LIGHT = 299_792_458.0

# Comparator samples kept per detection buffer after envelope decimation.
COMPARATOR_SAMPLES_PER_BUFFER = 10

# Stream labels for derive_seed(); fixed so traces stay reproducible.
STREAM_PAYLOAD = 1
STREAM_PHASE = 2
STREAM_NOISE = 3
STREAM_LISTEN_OFFSET = 4
STREAM_TRIAL = 5
STREAM_CELL = 6


class ConfigError(ValueError):
    """Raised when a SimConfig violates one or more invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        raise ValueError(f"power must be positive, got {p_w!r}")
    return 10.0 * math.log10(p_w) + 30.0


@dataclass(frozen=True)
class SimConfig:
    """Physical-layer and detector parameters.

    Defaults are the reference simulation settings.  ``buffer_duration_s``
    defaults to ``window_L_s / detections_per_window`` when left as None.

    The last three fields are simulator knobs rather than radio parameters:
    ``noise_enabled`` switches receiver noise off, ``self_muting`` stops a
    node from hearing its own pulses (half duplex), and
    ``sync_guard_buffers`` is how many buffers before the expected pulse a
    synchronized node opens its listening window.
    """

    carrier_freq_hz: float = 2.4e9
    symbol_interval_Ts_s: float = 10e-6
    pulse_duration_Tp_s: float = 0.2e-6
    window_L_s: float = 1.875e-6
    buffer_duration_s: float | None = None
    detections_per_window: int = 18
    tx_power_dbm: float = 0.0
    noise_power_dbm: float = -103.0
    noise_figure_db: float = 5.0
    rx_sensitivity_dbm: float = -90.0
    signal_bandwidth_hz: float = 10e6
    baseband_sample_rate_hz: float = 96e6
    reflections_enabled: bool = False
    rng_seed: int = 0
    noise_enabled: bool = True
    self_muting: bool = True
    sync_guard_buffers: int = 2

    def __post_init__(self):
        if self.buffer_duration_s is None:
            object.__setattr__(
                self, "buffer_duration_s", self.window_L_s / self.detections_per_window
            )

    @property
    def data_rate_bps(self) -> float:
        return 1.0 / self.symbol_interval_Ts_s

    @property
    def rx_noise_dbm(self) -> float:
        """In-band receiver noise power: thermal floor plus noise figure."""
        return self.noise_power_dbm + self.noise_figure_db

    @property
    def threshold_amplitude(self) -> float:
        return math.sqrt(dbm_to_watts(self.rx_sensitivity_dbm))

    # Integer sample counts at the baseband rate.  Durations that do not land
    # on the sample grid are rejected by validate_config().
    def samples(self, duration_s: float) -> int:
        return int(round(duration_s * self.baseband_sample_rate_hz))

    @property
    def symbol_samples(self) -> int:
        return self.samples(self.symbol_interval_Ts_s)

    @property
    def window_samples(self) -> int:
        return self.samples(self.window_L_s)

    @property
    def buffer_samples(self) -> int:
        return self.samples(self.buffer_duration_s)

    @property
    def guard_samples(self) -> int:
        return self.sync_guard_buffers * self.buffer_samples

    def with_(self, **changes: Any) -> "SimConfig":
        if "window_L_s" in changes or "detections_per_window" in changes:
            changes.setdefault("buffer_duration_s", None)
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["data_rate_bps"] = self.data_rate_bps
        return d

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


_FIELD_NAMES = {f.name for f in fields(SimConfig)}


def config_from_dict(d: dict[str, Any]) -> SimConfig:
    d = dict(d)
    rate = d.pop("data_rate_bps", None)
    unknown = set(d) - _FIELD_NAMES
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in sorted(unknown)])
    cfg = SimConfig(**d)
    if rate is not None and not math.isclose(rate * cfg.symbol_interval_Ts_s, 1.0, rel_tol=1e-9):
        raise ConfigError(["data_rate_bps/symbol_interval_Ts_s: rate x Ts must equal 1"])
    return cfg


def save_config(cfg: SimConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


def load_config(path: str | Path) -> SimConfig:
    return config_from_dict(yaml.safe_load(Path(path).read_text()) or {})


def _on_grid(duration_s: float, fs: float) -> bool:
    n = duration_s * fs
    return abs(n - round(n)) < 1e-6 and round(n) >= 1


def validate_config(cfg: SimConfig) -> SimConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError.

    All violations are collected so the error names every offending field
    pair at once.
    """
    bad: list[str] = []
    Ts, Tp, L = cfg.symbol_interval_Ts_s, cfg.pulse_duration_Tp_s, cfg.window_L_s
    fs = cfg.baseband_sample_rate_hz
    if fs <= 0:
        bad.append("baseband_sample_rate_hz: must be positive")
    if Tp <= 0 or Tp > Ts / 10:
        bad.append("pulse_duration_Tp_s/symbol_interval_Ts_s: pulse must satisfy 0 < Tp <= Ts/10")
    if not 0 < L < Ts:
        bad.append("window_L_s/symbol_interval_Ts_s: window must satisfy 0 < L < Ts")
    if cfg.detections_per_window < 1:
        bad.append("detections_per_window: must be >= 1")
    elif cfg.buffer_duration_s * cfg.detections_per_window > L * (1 + 1e-9):
        bad.append("buffer_duration_s/window_L_s: buffers x detections exceed the window")
    if fs < 2 * cfg.signal_bandwidth_hz:
        bad.append("baseband_sample_rate_hz/signal_bandwidth_hz: rate below twice the bandwidth")
    if not math.isclose(cfg.data_rate_bps * Ts, 1.0, rel_tol=1e-12):
        bad.append("data_rate_bps/symbol_interval_Ts_s: rate x Ts must equal 1")
    if cfg.sync_guard_buffers < 1 or cfg.sync_guard_buffers >= cfg.detections_per_window:
        bad.append("sync_guard_buffers/detections_per_window: guard must be in [1, detections)")
    if fs > 0:
        for name in ("symbol_interval_Ts_s", "window_L_s", "buffer_duration_s"):
            if not _on_grid(getattr(cfg, name), fs):
                bad.append(f"{name}/baseband_sample_rate_hz: not a whole number of samples")
        if _on_grid(cfg.buffer_duration_s, fs) and cfg.buffer_samples % COMPARATOR_SAMPLES_PER_BUFFER:
            bad.append(
                "buffer_duration_s/baseband_sample_rate_hz: buffer samples must be a "
                f"multiple of {COMPARATOR_SAMPLES_PER_BUFFER}"
            )
    if bad:
        raise ConfigError(bad)
    return cfg


def derive_seed(seed: int, *path: int) -> int:
    """Deterministically split ``seed`` into a child seed addressed by ``path``.

    Uses numpy's SeedSequence spawn keys, so ``derive_seed(s, k)`` is
    independent of how many other children were derived or in what order.
    The result is a non-negative 63-bit integer.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return ((int(hi) << 32) | int(lo)) >> 1


def make_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(path)))


@dataclass(frozen=True)
class Waveform:
    """Complex-baseband sample block; sample k sits at start_time_s + k / rate."""

    samples: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("waveform needs a non-empty 1-D sample array")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(self.samples.size) / self.sample_rate_hz

    @property
    def end_time_s(self) -> float:
        return self.start_time_s + self.samples.size / self.sample_rate_hz

    def energy(self) -> float:
        """Energy in joules under the |s|^2 = watts convention."""
        return float(np.sum(np.abs(self.samples) ** 2)) / self.sample_rate_hz

    def peak_power_w(self) -> float:
        return float(np.max(np.abs(self.samples) ** 2))
