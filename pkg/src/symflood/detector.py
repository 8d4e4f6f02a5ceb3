"""Non-coherent windowed OOK detector.

Pipeline per buffer: in-band lowpass -> envelope |y| -> decimate to the
comparator rate -> compare against the sensitivity threshold -> majority
vote.  The lowpass runs continuously over the sample stream (callers pass
the preceding samples as ``history``); buffers are otherwise independent
decisions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal

from .core import COMPARATOR_SAMPLES_PER_BUFFER, SimConfig, Waveform

DETECTOR_TAPS = 31
# Passband edge relative to the one-sided signal bandwidth.  Wide enough
# that the filter is nearly transparent to a shaped pulse.
DETECTOR_CUTOFF_FRACTION = 0.75


@lru_cache(maxsize=16)
def _taps_cached(fs: float, bandwidth: float) -> np.ndarray:
    taps = signal.firwin(DETECTOR_TAPS, DETECTOR_CUTOFF_FRACTION * bandwidth, fs=fs)
    taps.setflags(write=False)
    return taps


def detector_taps(cfg: SimConfig) -> np.ndarray:
    return _taps_cached(float(cfg.baseband_sample_rate_hz), float(cfg.signal_bandwidth_hz))


def history_samples(cfg: SimConfig) -> int:
    """Samples preceding a buffer that the in-band filter looks back over."""
    return DETECTOR_TAPS - 1


def group_delay_samples(cfg: SimConfig) -> int:
    return (DETECTOR_TAPS - 1) // 2


@lru_cache(maxsize=16)
def _filter_matrix(fs: float, bandwidth: float, nb: int) -> np.ndarray:
    h = _taps_cached(fs, bandwidth)
    H = h.size - 1
    F = np.zeros((nb, H + nb))
    for k in range(nb):
        F[k, k : k + H + 1] = h[::-1]
    F.setflags(write=False)
    return F


def vote_counts(segments: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Comparator votes for a batch of buffers.

    ``segments`` has shape (B, history + buffer_samples): each row is the
    filter history followed by the buffer itself.  Returns, per row, how many
    decimated envelope samples exceed the threshold.
    """
    nb = cfg.buffer_samples
    F = _filter_matrix(float(cfg.baseband_sample_rate_hz), float(cfg.signal_bandwidth_hz), nb)
    segments = np.atleast_2d(segments)
    if segments.shape[-1] != F.shape[1]:
        raise ValueError(
            f"expected {F.shape[1]} samples per segment (history + buffer), got {segments.shape[-1]}"
        )
    env = np.abs(segments @ F.T)
    env = env[:, :: nb // COMPARATOR_SAMPLES_PER_BUFFER]
    return np.count_nonzero(env > cfg.threshold_amplitude, axis=1)


def majority(votes: np.ndarray | int) -> np.ndarray | bool:
    """Strictly more than half of the comparator samples."""
    return np.asarray(votes) * 2 > COMPARATOR_SAMPLES_PER_BUFFER


def _with_history(samples: np.ndarray, history: np.ndarray | None, H: int) -> np.ndarray:
    if history is None:
        history = np.zeros(H, dtype=complex)
    history = np.asarray(history, dtype=complex)
    if history.size < H:
        history = np.concatenate([np.zeros(H - history.size, dtype=complex), history])
    return np.concatenate([history[history.size - H :], samples])


def process_buffer(
    samples: Waveform, cfg: SimConfig, history: np.ndarray | None = None
) -> bool:
    """Decide pulse / no pulse for one buffer of received samples.

    ``history`` holds the samples just before the buffer; missing history is
    treated as silence, i.e. the filter starts from rest.
    """
    nb = cfg.buffer_samples
    if len(samples) != nb:
        raise ValueError(f"buffer must hold {nb} samples, got {len(samples)}")
    seg = _with_history(samples.samples, history, history_samples(cfg))
    return bool(majority(vote_counts(seg[None, :], cfg)[0]))


@dataclass(frozen=True)
class SymbolDecision:
    bit: int
    decision_time_s: float
    buffer_index: int
    buffers_evaluated: int


def detect_symbol(
    rx: Waveform, cfg: SimConfig, history: np.ndarray | None = None
) -> SymbolDecision:
    """Run the window's buffers in order and stop at the first pulse.

    ``rx`` starts at the window start and must cover the whole window.
    """
    nb, L = cfg.buffer_samples, cfg.window_samples
    if len(rx) < L:
        raise ValueError(f"window needs {L} samples, got {len(rx)}")
    H = history_samples(cfg)
    x = _with_history(rx.samples[:L], history, H)
    fs = rx.sample_rate_hz
    n_buf = cfg.detections_per_window
    for m in range(n_buf):
        seg = x[m * nb : m * nb + H + nb]
        if majority(vote_counts(seg[None, :], cfg)[0]):
            return SymbolDecision(1, rx.start_time_s + (m + 1) * nb / fs, m, m + 1)
    return SymbolDecision(0, rx.start_time_s + L / fs, 0, n_buf)


def detect_preamble(
    rx: Waveform, cfg: SimConfig, history: np.ndarray | None = None
) -> float | None:
    """Listen on consecutive buffers; return the end time of the first that fires."""
    nb = cfg.buffer_samples
    H = history_samples(cfg)
    x = _with_history(rx.samples, history, H)
    n_buf = len(rx) // nb
    fs = rx.sample_rate_hz
    block = 4096
    for b0 in range(0, n_buf, block):
        b1 = min(n_buf, b0 + block)
        idx = (np.arange(b0, b1) * nb)[:, None] + np.arange(H + nb)[None, :]
        fired = np.flatnonzero(majority(vote_counts(x[idx], cfg)))
        if fired.size:
            return rx.start_time_s + (b0 + fired[0] + 1) * nb / fs
    return None


@dataclass
class DetectorState:
    """Symbol clock of a synchronized node.

    ``sync_anchor_s`` is the start of the preamble's own symbol interval:
    the preamble fired at the end of buffer ``sync_guard_buffers - 1`` of a
    window opening at the anchor, and every later symbol k is listened for
    in the window opening at ``anchor + k * Ts``.
    """

    next_symbol_start_s: float
    symbol_index: int
    sync_anchor_s: float

    @classmethod
    def from_preamble(cls, detection_time_s: float, cfg: SimConfig) -> "DetectorState":
        anchor = detection_time_s - cfg.sync_guard_buffers * cfg.buffer_duration_s
        return cls(anchor + cfg.symbol_interval_Ts_s, 1, anchor)

    def advance(self, cfg: SimConfig) -> None:
        self.symbol_index += 1
        self.next_symbol_start_s = self.sync_anchor_s + self.symbol_index * cfg.symbol_interval_Ts_s


@dataclass(frozen=True)
class DetectionEvent:
    node: int
    symbol_index: int
    bit: int
    decision_time_s: float
    buffer_index: int


class VoteLog:
    """Optional per-buffer tally recorder for detector debugging."""

    def __init__(self):
        self.rows: list[tuple[int, float, int, int]] = []

    def record(self, nodes, buffer_end_s, votes) -> None:
        for n, t, v in zip(nodes, buffer_end_s, votes):
            self.rows.append((int(n), float(t), int(v), int(majority(v))))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "buffer_end_s", "votes", "fired"])
            w.writerows(self.rows)
