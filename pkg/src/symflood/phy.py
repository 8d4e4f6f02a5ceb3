"""Pulse-based OOK transmitter, free-space channel, superposition and noise.

Everything is complex baseband at ``cfg.baseband_sample_rate_hz``.  The
carrier only shows up through the phase term exp(-j 2 pi f_c tau) of each
path, evaluated at the exact (unrounded) delay.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, signal

from .core import (
    SPEED_OF_LIGHT,
    STREAM_NOISE,
    SimConfig,
    Waveform,
    dbm_to_watts,
    make_rng,
)
from .topology import Topology, distance_matrix

SHAPING_TAPS = 81
SHAPING_KAISER_BETA = 8.0


@lru_cache(maxsize=16)
def _lowpass_cached(fs: float, bandwidth: float) -> np.ndarray:
    def excess_db(fc: float) -> float:
        taps = signal.firwin(SHAPING_TAPS, fc, window=("kaiser", SHAPING_KAISER_BETA), fs=fs)
        _, h = signal.freqz(taps, worN=[bandwidth / 2], fs=fs)
        return 20 * math.log10(abs(h[0])) + 3.0

    fc = optimize.brentq(excess_db, 0.3 * bandwidth / 2, min(2.0 * bandwidth / 2, 0.49 * fs))
    taps = signal.firwin(SHAPING_TAPS, fc, window=("kaiser", SHAPING_KAISER_BETA), fs=fs)
    taps.setflags(write=False)
    return taps


def lowpass_taps(cfg: SimConfig) -> np.ndarray:
    """Linear-phase FIR, unit DC gain, -3 dB at half the signal bandwidth."""
    return _lowpass_cached(float(cfg.baseband_sample_rate_hz), float(cfg.signal_bandwidth_hz))


def make_pulse(cfg: SimConfig, bit: int = 1) -> Waveform | None:
    """Rectangular on-off keyed pulse before shaping; bit 0 yields silence (None).

    Peak power equals the transmit power.  The pulse covers
    ceil(Tp * fs) samples so a pulse is never shorter than Tp.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if bit == 0:
        return None
    n = math.ceil(cfg.pulse_duration_Tp_s * cfg.baseband_sample_rate_hz - 1e-9)
    amp = math.sqrt(dbm_to_watts(cfg.tx_power_dbm))
    return Waveform(np.full(n, amp, dtype=complex), cfg.baseband_sample_rate_hz, 0.0)


def shape_pulse(w: Waveform | None, cfg: SimConfig) -> Waveform | None:
    """Band-limit a pulse with the causal shaping FIR (full convolution)."""
    if w is None:
        return None
    y = np.convolve(w.samples, lowpass_taps(cfg))
    return Waveform(y, w.sample_rate_hz, w.start_time_s)


@lru_cache(maxsize=16)
def _tx_pulse_cached(cfg: SimConfig) -> np.ndarray:
    p = shape_pulse(make_pulse(cfg, 1), cfg).samples.copy()
    p.setflags(write=False)
    return p


def tx_pulse(cfg: SimConfig) -> np.ndarray:
    """Samples of the shaped pulse a node emits for a 1-bit."""
    return _tx_pulse_cached(cfg)


def fspl_db(d_m: float, f_hz: float) -> float:
    return 20 * math.log10(4 * math.pi * d_m * f_hz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class PathModel:
    tx: int
    rx: int
    gain: complex
    delay_s: float


@dataclass(frozen=True)
class TxEvent:
    tx: int
    emit_time_s: float
    phase0: float = 0.0

    def __post_init__(self):
        if self.emit_time_s < 0:
            raise ValueError("emit_time_s must be non-negative")


def _path_gain(length_m: float, cfg: SimConfig, coeff: float = 1.0) -> complex:
    if length_m <= 0:
        raise ValueError("path length must be positive")
    lam = SPEED_OF_LIGHT / cfg.carrier_freq_hz
    amp = lam / (4 * math.pi * length_m)
    if amp > 1:
        raise ValueError(f"path of {length_m} m is inside the near field")
    tau = length_m / SPEED_OF_LIGHT
    return coeff * amp * complex(np.exp(-2j * math.pi * cfg.carrier_freq_hz * tau))


def _image_points(x: float, y: float, side: float) -> list[tuple[float, float]]:
    # first-order mirror images in the four walls of the square area
    return [(-x, y), (2 * side - x, y), (x, -y), (x, 2 * side - y)]


def _degenerate_image(length, los):
    # a node standing on the wall: its image coincides with the direct path
    return np.abs(length - los) <= 1e-9 * np.maximum(los, 1.0)


def path_model(topo: Topology, tx: int, rx: int, cfg: SimConfig) -> PathModel | list[PathModel]:
    """Free-space line-of-sight path, plus wall images when reflections are on."""
    if tx == rx:
        raise ValueError("tx and rx must differ")
    (xt, yt), (xr, yr) = topo.node_positions[tx], topo.node_positions[rx]
    d = math.hypot(xt - xr, yt - yr)
    if d == 0:
        raise ValueError(f"nodes {tx} and {rx} are co-located")
    los = PathModel(tx, rx, _path_gain(d, cfg), d / SPEED_OF_LIGHT)
    if not cfg.reflections_enabled:
        return los
    paths = [los]
    for xi, yi in _image_points(xt, yt, topo.area_side_m):
        length = math.hypot(xi - xr, yi - yr)
        if _degenerate_image(length, d):
            continue
        paths.append(PathModel(tx, rx, _path_gain(length, cfg, -1.0), length / SPEED_OF_LIGHT))
    return paths


@dataclass(frozen=True)
class Channel:
    """All pairwise paths as dense arrays indexed [path, tx, rx].

    ``delay_samples`` is the nearest-sample envelope placement; ``gain``
    already carries the carrier phase of the exact delay.  Self-links are
    zero unless self-muting is off, in which case a node hears itself with
    unit gain and no delay.
    """

    gain: np.ndarray
    delay_s: np.ndarray
    delay_samples: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.gain.shape[0]

    def min_delay_samples(self) -> int:
        n = self.gain.shape[1]
        off = ~np.eye(n, dtype=bool)
        if not off.any():
            return 1
        return max(1, int(self.delay_samples[:, off].min()))


def build_channel(topo: Topology, cfg: SimConfig) -> Channel:
    pos = topo.positions()
    n = topo.n_nodes
    fs = cfg.baseband_sample_rate_hz
    lam = SPEED_OF_LIGHT / cfg.carrier_freq_hz
    d_los = distance_matrix(topo)
    if n > 1 and (d_los[~np.eye(n, dtype=bool)] == 0).any():
        raise ValueError("topology has co-located nodes")
    lengths = [d_los]
    coeffs = [1.0]
    if cfg.reflections_enabled:
        side = topo.area_side_m
        for k in range(4):
            img = np.array([_image_points(x, y, side)[k] for x, y in pos])
            lengths.append(np.hypot(img[:, None, 0] - pos[None, :, 0], img[:, None, 1] - pos[None, :, 1]))
            coeffs.append(-1.0)
    length = np.stack(lengths)
    with np.errstate(divide="ignore"):
        amp = np.where(length > 0, lam / (4 * math.pi * np.where(length > 0, length, 1.0)), 0.0)
    amp[1:][_degenerate_image(length[1:], d_los[None])] = 0.0
    tau = length / SPEED_OF_LIGHT
    gain = np.asarray(coeffs)[:, None, None] * amp * np.exp(-2j * math.pi * cfg.carrier_freq_hz * tau)
    eye = np.eye(n, dtype=bool)
    gain[:, eye] = 0.0
    if not cfg.self_muting:
        gain[0, eye] = 1.0
        tau[0, eye] = 0.0
    delay_samples = np.rint(tau * fs).astype(np.int64)
    return Channel(gain, tau, delay_samples)


def superpose(
    events: Sequence[tuple[TxEvent, Waveform]],
    paths: dict[int, PathModel | Sequence[PathModel]],
    span: tuple[float, float],
    cfg: SimConfig,
) -> Waveform:
    """Sum of every event's waveform through every path to one receiver.

    ``paths`` maps a transmitter id to its path(s) towards the receiver.
    Envelope placement uses the delay rounded to the nearest sample on the
    span's grid; the carrier phase comes from the exact delay inside ``gain``.
    """
    fs = cfg.baseband_sample_rate_hz
    t0, t1 = span
    n = int(round((t1 - t0) * fs))
    if n <= 0:
        raise ValueError("span must cover at least one sample")
    out = np.zeros(n, dtype=complex)
    for ev, w in events:
        if not math.isclose(w.sample_rate_hz, fs, rel_tol=1e-12):
            raise ValueError("waveform sample rate does not match the simulation rate")
        p = paths[ev.tx]
        for path in [p] if isinstance(p, PathModel) else p:
            start = int(round((ev.emit_time_s + w.start_time_s + path.delay_s - t0) * fs))
            lo, hi = max(start, 0), min(start + len(w), n)
            if lo >= hi:
                continue
            coef = path.gain * np.exp(1j * ev.phase0)
            out[lo:hi] += coef * w.samples[lo - start : hi - start]
    return Waveform(out, fs, t0)


# ---------------------------------------------------------------------------
# receiver noise


def inband_power_w(x: np.ndarray, fs: float, bandwidth: float) -> float:
    """Mean power of ``x`` inside |f| < bandwidth/2 (ideal brick-wall, via FFT)."""
    x = np.asarray(x)
    X = np.fft.fft(x)
    f = np.fft.fftfreq(x.size, 1.0 / fs)
    return float(np.sum(np.abs(X[np.abs(f) < bandwidth / 2]) ** 2) / x.size**2)


@lru_cache(maxsize=16)
def _white_std_cached(fs: float, bandwidth: float) -> float:
    taps = _lowpass_cached(fs, bandwidth)
    nfft = 1 << 16
    H = np.fft.fft(taps, nfft)
    f = np.fft.fftfreq(nfft, 1.0 / fs)
    # fraction of white-noise power that lands in band after the filter
    frac = float(np.sum(np.abs(H[np.abs(f) < bandwidth / 2]) ** 2) / nfft)
    return 1.0 / math.sqrt(frac)


def white_noise_std(cfg: SimConfig) -> float:
    """Per-sample std of the white complex noise fed to the band-limiting filter.

    Chosen so the expected in-band power after filtering equals the
    receiver noise power (thermal floor + noise figure).
    """
    p_n = dbm_to_watts(cfg.rx_noise_dbm)
    return math.sqrt(p_n) * _white_std_cached(
        float(cfg.baseband_sample_rate_hz), float(cfg.signal_bandwidth_hz)
    )


def _complex_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * (std / math.sqrt(2))


def bandlimited_noise(n: int, cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    taps = lowpass_taps(cfg)
    white = _complex_normal(rng, (n + taps.size - 1,), white_noise_std(cfg))
    return signal.fftconvolve(white, taps, mode="valid")


def add_noise(
    w: Waveform, cfg: SimConfig, rng: np.random.Generator, enabled: bool | None = None
) -> Waveform:
    """Add band-limited circular complex Gaussian receiver noise."""
    on = cfg.noise_enabled if enabled is None else enabled
    if not on:
        return w
    return Waveform(w.samples + bandlimited_noise(len(w), cfg, rng), w.sample_rate_hz, w.start_time_s)


class NoiseBank:
    """Continuous per-node noise tracks, generated lazily in fixed chunks.

    The noise at (node, sample index) depends only on the trial seed, so
    the engine can request samples in any order or batch size and still get
    bit-identical results.  Chunk c is seeded from (seed, c); continuity
    across chunk edges comes from re-running the filter over the tail of the
    previous chunk's white noise.
    """

    CHUNK = 2048
    KEY_OFFSET = 1 << 20

    def __init__(self, cfg: SimConfig, n_nodes: int, seed: int):
        self.cfg = cfg
        self.n_nodes = n_nodes
        self.seed = int(seed)
        self.enabled = cfg.noise_enabled
        self.taps = lowpass_taps(cfg)
        self.std = white_noise_std(cfg)
        self._white: dict[int, np.ndarray] = {}
        self._filtered: dict[int, np.ndarray] = {}

    def _white_chunk(self, c: int) -> np.ndarray:
        w = self._white.get(c)
        if w is None:
            rng = make_rng(self.seed, STREAM_NOISE, c + self.KEY_OFFSET)
            w = _complex_normal(rng, (self.n_nodes, self.CHUNK), self.std)
            self._white[c] = w
        return w

    def _chunk(self, c: int) -> np.ndarray:
        y = self._filtered.get(c)
        if y is None:
            k = self.taps.size - 1
            x = np.concatenate([self._white_chunk(c - 1)[:, -k:], self._white_chunk(c)], axis=1)
            y = signal.fftconvolve(x, self.taps[None, :], mode="valid", axes=1)
            self._filtered[c] = y
            self._evict(c)
        return y

    def _evict(self, newest: int) -> None:
        for store in (self._white, self._filtered):
            for key in [k for k in store if k < newest - 4]:
                del store[key]

    def get(self, nodes: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Noise for row ``nodes[b]`` at sample indices ``idx[b, :]``."""
        if not self.enabled:
            return np.zeros(idx.shape, dtype=complex)
        cid = np.floor_divide(idx, self.CHUNK)
        out = np.empty(idx.shape, dtype=complex)
        rows = np.broadcast_to(np.asarray(nodes)[:, None], idx.shape)
        for c in range(int(cid.min()), int(cid.max()) + 1):
            m = cid == c
            if m.any():
                out[m] = self._chunk(c)[rows[m], idx[m] - c * self.CHUNK]
        return out


def dump_waveform_csv(w: Waveform, path: str | Path) -> None:
    """Debug dump of a waveform as (time_s, re, im) rows."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["time_s", "re", "im"])
        for t, s in zip(w.times, w.samples):
            out.writerow([repr(float(t)), repr(float(s.real)), repr(float(s.imag))])


def received_power_dbm(tx_power_dbm: float, gains: Iterable[complex]) -> float:
    """Incoherent received power through the given paths (link-budget helper)."""
    return tx_power_dbm + 10 * math.log10(sum(abs(g) ** 2 for g in gains))
