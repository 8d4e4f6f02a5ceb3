"""Symbol-synchronous flood over a grid.

The initiator emits the packet on its own symbol clock; every other node
listens for the preamble, locks its symbol clock to the detection, and from
then on listens for a window at the start of every symbol interval,
relaying each detected 1 the moment it is decided.

Timeline realization
--------------------
All times are integer sample indices at the baseband rate.  The engine
walks forward through every listening node's detection buffers in batches.
A pulse emitted at sample t reaches any other node no earlier than
t + dmin (dmin = shortest inter-node delay), so all buffers ending within
dmin of the earliest detection in a batch are unaffected by that
detection and can be decided together.  Each batch therefore synthesizes
and detects many buffers at once, then keeps only the results up to
(first detection + dmin).  Silent stretches are covered in one large batch.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import detector as det
from .core import (
    STREAM_LISTEN_OFFSET,
    STREAM_NOISE,
    STREAM_PAYLOAD,
    STREAM_PHASE,
    STREAM_TRIAL,
    SimConfig,
    derive_seed,
    make_rng,
    validate_config,
)
from .detector import DetectionEvent, DetectorState, VoteLog
from .phy import NoiseBank, TxEvent, build_channel, tx_pulse
from .topology import Topology

IDLE, SYNCED, DONE = "idle", "synced", "transmitting-sleep"


@dataclass
class NodeState:
    mode: str = IDLE
    detector: DetectorState | None = None
    relayed_this_symbol: bool = False


@dataclass
class PacketTrace:
    tx_bits: tuple[int, ...]
    per_node_bits: dict[int, tuple[int, ...]]
    per_node_events: dict[int, list[DetectionEvent]]
    initiator_start_s: float
    trial_seed: int
    tx_events: list[TxEvent] = field(default_factory=list)
    sync_anchor_s: dict[int, float | None] = field(default_factory=dict)
    config_hash: str = ""

    @property
    def n_bits(self) -> int:
        return len(self.tx_bits)

    def to_json_line(self) -> str:
        nodes = {}
        for node, bits in sorted(self.per_node_bits.items()):
            nodes[str(node)] = {
                "bits": _bits_to_hex(bits),
                "n": len(bits),
                "times_us": [round(ev.decision_time_s * 1e6, 3) for ev in self.per_node_events[node]],
            }
        rec = {
            "seed": self.trial_seed,
            "config_hash": self.config_hash,
            "n_bits": self.n_bits,
            "tx_bits": _bits_to_hex(self.tx_bits),
            "nodes": nodes,
        }
        return json.dumps(rec, sort_keys=True)


def _bits_to_hex(bits: Sequence[int]) -> str:
    if not bits:
        return ""
    width = math.ceil(len(bits) / 4)
    return format(int("".join(map(str, bits)), 2), f"0{width}x")


def hex_to_bits(h: str, n: int) -> tuple[int, ...]:
    if n == 0:
        return ()
    return tuple(int(b) for b in format(int(h, 16), f"0{n}b"))


class _Flood:
    def __init__(self, topo: Topology, tx_bits: tuple[int, ...], cfg: SimConfig, seed: int,
                 vote_log: VoteLog | None):
        self.topo, self.cfg, self.seed = topo, cfg, seed
        self.tx_bits = tx_bits
        self.n = len(tx_bits)
        N = self.N = topo.n_nodes
        self.fs = cfg.baseband_sample_rate_hz
        self.nb = cfg.buffer_samples
        self.Ts = cfg.symbol_samples
        self.D = cfg.detections_per_window
        self.guard = cfg.guard_samples
        self.H = det.history_samples(cfg)
        self.vote_log = vote_log

        ch = build_channel(topo, cfg)
        self.gain, self.delay = ch.gain, ch.delay_samples
        self.dmin = ch.min_delay_samples()
        pulse = tx_pulse(cfg)
        self.P = pulse.size
        self.pulse_ext = np.concatenate([[0], pulse, [0]]).astype(complex)

        self.phase0 = make_rng(seed, STREAM_PHASE).uniform(0, 2 * np.pi, N)
        self.rot = np.exp(1j * self.phase0)
        offsets = make_rng(seed, STREAM_LISTEN_OFFSET).integers(0, self.nb, N)
        self.noise = NoiseBank(cfg, N, derive_seed(seed, STREAM_NOISE))

        # per-transmitter envelope reach, over all receivers and paths
        d = np.where(np.abs(self.gain) > 0, self.delay, _FAR)
        self.reach_lo = d.min(axis=(0, 2))
        self.reach_hi = self.delay.max(axis=(0, 2)) + self.P

        self.em_t: list[int] = []
        self.em_tx: list[int] = []
        ini = topo.initiator_index
        for k, b in enumerate(tx_bits):
            if b:
                self.em_t.append(k * self.Ts)
                self.em_tx.append(ini)

        self.state = [NodeState() for _ in range(N)]
        self.state[ini].mode = DONE
        self.idle_next = offsets.astype(np.int64)
        self.idle_stop = (self.n + 1) * self.Ts
        self.anchor = np.zeros(N, dtype=np.int64)
        self.sym = np.zeros(N, dtype=np.int64)
        self.slot = np.zeros(N, dtype=np.int64)
        self.bits: dict[int, list[int]] = {i: [] for i in range(N) if i != ini}
        self.events: dict[int, list[DetectionEvent]] = {i: [] for i in range(N) if i != ini}
        self.relays: list[TxEvent] = []

    # -- schedules -------------------------------------------------------

    def _first_end(self, i: int) -> float:
        st = self.state[i]
        if st.mode == IDLE:
            s = self.idle_next[i]
            return s + self.nb if s < self.idle_stop else math.inf
        if st.mode == SYNCED:
            return self.anchor[i] + self.sym[i] * self.Ts + (self.slot[i] + 1) * self.nb
        return math.inf

    def _buffers(self, i: int, hi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Buffer starts for node i ending <= hi, assuming nothing fires."""
        nb = self.nb
        st = self.state[i]
        if st.mode == IDLE:
            s0 = int(self.idle_next[i])
            last = min(hi - nb, self.idle_stop - 1)
            if last < s0:
                return _EMPTY3
            starts = np.arange(s0, last + 1, nb, dtype=np.int64)
            neg = np.full(starts.size, -1, dtype=np.int64)
            return starts, neg, neg
        if st.mode != SYNCED:
            return _EMPTY3
        out_s, out_j, out_m = [], [], []
        j, m = int(self.sym[i]), int(self.slot[i])
        while j < self.n:
            w0 = int(self.anchor[i]) + j * self.Ts
            ms = np.arange(m, self.D, dtype=np.int64)
            starts = w0 + ms * nb
            keep = starts + nb <= hi
            if not keep.any():
                break
            out_s.append(starts[keep])
            out_j.append(np.full(int(keep.sum()), j, dtype=np.int64))
            out_m.append(ms[keep])
            if not keep.all():
                break
            j, m = j + 1, 0
        if not out_s:
            return _EMPTY3
        return np.concatenate(out_s), np.concatenate(out_j), np.concatenate(out_m)

    # -- signal ----------------------------------------------------------

    def _synthesize(self, rows: np.ndarray, starts: np.ndarray) -> np.ndarray:
        H, nb = self.H, self.nb
        t = starts[:, None] + np.arange(-H, nb)[None, :]
        x = self.noise.get(rows, t)
        if not self.em_t:
            return x
        em_t = np.asarray(self.em_t, dtype=np.int64)
        em_tx = np.asarray(self.em_tx, dtype=np.int64)
        lo, hi = int(t.min()), int(t.max())
        rel = (em_t + self.reach_lo[em_tx] <= hi) & (em_t + self.reach_hi[em_tx] > lo)
        if not rel.any():
            return x
        em_t, em_tx = em_t[rel], em_tx[rel]
        E, B, S = em_t.size, rows.size, t.shape[1]
        step = max(1, int(4_000_000 // max(1, E * S)))
        for b0 in range(0, B, step):
            sl = slice(b0, b0 + step)
            r, tt = rows[sl], t[sl]
            for p in range(self.gain.shape[0]):
                A = em_t[:, None] + self.delay[p][em_tx[:, None], r[None, :]]
                C = self.gain[p][em_tx[:, None], r[None, :]] * self.rot[em_tx][:, None]
                off = tt[None, :, :] - A[:, :, None]
                np.clip(off, -1, self.P, out=off)
                vals = self.pulse_ext[off + 1]
                x[sl] += np.einsum("eb,ebs->bs", C, vals)
        return x

    # -- state updates ---------------------------------------------------

    def _emit(self, i: int, t: int) -> None:
        self.em_t.append(t)
        self.em_tx.append(i)
        self.relays.append(TxEvent(i, t / self.fs, float(self.phase0[i])))
        self.state[i].relayed_this_symbol = True

    def _apply(self, i: int, s: int, j: int, m: int, fired: bool) -> None:
        st, nb, fs = self.state[i], self.nb, self.fs
        end = s + nb
        if st.mode == IDLE:
            if fired:
                self.anchor[i] = end - self.guard
                st.mode = SYNCED
                st.detector = DetectorState.from_preamble(end / fs, self.cfg)
                self.events[i].append(DetectionEvent(i, 0, 1, end / fs, self.cfg.sync_guard_buffers - 1))
                self.bits[i].append(1)
                self._emit(i, end)
                self._next_symbol(i, 1)
            else:
                self.idle_next[i] = s + nb
                if self.idle_next[i] >= self.idle_stop:
                    st.mode = DONE
            return
        if fired:
            self.events[i].append(DetectionEvent(i, j, 1, end / fs, m))
            self.bits[i].append(1)
            self._emit(i, end)
            self._next_symbol(i, j + 1)
        elif m == self.D - 1:
            self.events[i].append(DetectionEvent(i, j, 0, end / fs, 0))
            self.bits[i].append(0)
            self._next_symbol(i, j + 1)
        else:
            self.slot[i] = m + 1

    def _next_symbol(self, i: int, j: int) -> None:
        st = self.state[i]
        self.sym[i], self.slot[i] = j, 0
        st.relayed_this_symbol = False
        if st.detector is not None:
            st.detector.advance(self.cfg)
        if j >= self.n:
            st.mode = DONE

    # -- main loop -------------------------------------------------------

    def _batch_end(self, T: int) -> int:
        em_t = np.asarray(self.em_t, dtype=np.int64)
        if em_t.size:
            em_tx = np.asarray(self.em_tx, dtype=np.int64)
            f_lo = em_t + self.reach_lo[em_tx]
            f_hi = em_t + self.reach_hi[em_tx] + self.H + self.nb
            if np.any((f_lo <= T + self.dmin) & (f_hi > T)):
                return T + self.dmin
            later = f_lo[f_lo > T + self.dmin]
            nxt = int(later.min()) if later.size else T + self.Ts
        else:
            nxt = T + self.Ts
        return max(T + self.dmin, min(nxt, T + self.Ts))

    def run(self) -> None:
        T = -1
        listeners = [i for i in range(self.N) if self.state[i].mode != DONE]
        while True:
            listeners = [i for i in listeners if self.state[i].mode != DONE]
            if not listeners:
                break
            firsts = [self._first_end(i) for i in listeners]
            first = min(firsts)
            if first == math.inf:
                break
            T = max(T, int(first) - 1)
            hi = self._batch_end(T)
            per_node = []
            for i, f0 in zip(listeners, firsts):
                if f0 > hi:
                    continue
                s, j, m = self._buffers(i, hi)
                if s.size:
                    per_node.append((i, s, j, m))
            if not per_node:
                T = hi
                continue
            rows = np.concatenate([np.full(s.size, i, dtype=np.int64) for i, s, _, _ in per_node])
            starts = np.concatenate([s for _, s, _, _ in per_node])
            votes = det.vote_counts(self._synthesize(rows, starts), self.cfg)
            fired = det.majority(votes)
            ends = starts + self.nb
            cut = hi
            if fired.any():
                cut = min(hi, int(ends[fired].min()) + self.dmin)
            applied = []
            k = 0
            for i, s, j, m in per_node:
                f = fired[k : k + s.size]
                for q in range(s.size):
                    if s[q] + self.nb > cut:
                        break
                    self._apply(i, int(s[q]), int(j[q]), int(m[q]), bool(f[q]))
                    applied.append(k + q)
                    if f[q]:
                        break
                k += s.size
            if self.vote_log is not None:
                self.vote_log.record(rows[applied], ends[applied] / self.fs, votes[applied])
            T = cut

    def trace(self) -> PacketTrace:
        ini = self.topo.initiator_index
        tx_events = [TxEvent(ini, k * self.Ts / self.fs, float(self.phase0[ini]))
                     for k, b in enumerate(self.tx_bits) if b]
        tx_events += self.relays
        anchors = {}
        for i in self.bits:
            synced = bool(self.events[i])
            anchors[i] = float(self.anchor[i] / self.fs) if synced else None
        return PacketTrace(
            tx_bits=tuple(self.tx_bits),
            per_node_bits={i: tuple(b) if len(b) == self.n else () for i, b in self.bits.items()},
            per_node_events={i: list(ev) for i, ev in self.events.items()},
            initiator_start_s=0.0,
            trial_seed=self.seed,
            tx_events=tx_events,
            sync_anchor_s=anchors,
            config_hash=self.cfg.config_hash(),
        )


_EMPTY3 = (np.empty(0, dtype=np.int64),) * 3
_FAR = 1 << 40


def run_packet(
    topo: Topology,
    payload: Sequence[int],
    cfg: SimConfig,
    seed: int,
    vote_log: VoteLog | None = None,
) -> PacketTrace:
    """Flood one packet (preamble bit 1 + payload) from the initiator."""
    validate_config(cfg)
    payload = tuple(int(b) for b in payload)
    if not payload:
        raise ValueError("payload must not be empty")
    if any(b not in (0, 1) for b in payload):
        raise ValueError("payload bits must be 0 or 1")
    sim = _Flood(topo, (1,) + payload, cfg, int(seed), vote_log)
    sim.run()
    return sim.trace()


def trial_seed(seed: int, k: int) -> int:
    return derive_seed(seed, STREAM_TRIAL, k)


def random_payload(trial_seed_: int, payload_len: int) -> tuple[int, ...]:
    return tuple(int(b) for b in make_rng(trial_seed_, STREAM_PAYLOAD).integers(0, 2, payload_len))


def _one_trial(args) -> PacketTrace:
    topo, payload_len, cfg, seed = args
    return run_packet(topo, random_payload(seed, payload_len), cfg, seed)


def run_trials(
    topo: Topology,
    payload_len: int,
    n_packets: int,
    cfg: SimConfig,
    seed: int,
    threads: int = 1,
) -> list[PacketTrace]:
    """Independent trials; trial k uses derive_seed(seed, STREAM_TRIAL, k).

    ``threads`` only changes wall time: work is split across worker
    processes and results come back in trial order.
    """
    if payload_len < 1:
        raise ValueError("payload_len must be >= 1")
    validate_config(cfg)
    jobs = [(topo, payload_len, cfg, trial_seed(seed, k)) for k in range(n_packets)]
    if threads > 1 and n_packets > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_one_trial, jobs))
    return [_one_trial(j) for j in jobs]
