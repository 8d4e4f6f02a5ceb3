"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
session summary.  The full module takes roughly 15-20 minutes on one core.
"""

import math
import time

import numpy as np
import pytest

from oracles import envelope_vote_oracle, random_buffer_case, report, waveform
from symflood.core import SPEED_OF_LIGHT, SimConfig, Waveform, make_rng, watts_to_dbm
from symflood.detector import detect_symbol, group_delay_samples, history_samples, process_buffer
from symflood.engine import run_packet, run_trials
from symflood.experiments import builtin_spec, run_experiment, write_table
from symflood.metrics import aggregate, compute_metrics, frame_delivery_ratio
from symflood.phy import (
    SHAPING_TAPS,
    TxEvent,
    add_noise,
    inband_power_w,
    path_model,
    superpose,
    tx_pulse,
)
from symflood.topology import build_grid, hop_counts

CFG = SimConfig()
QUIET = SimConfig(noise_enabled=False)
TS = CFG.symbol_interval_Ts_s


def _summary(topo, packet_bits, n_packets, cfg, seed):
    traces = run_trials(topo, packet_bits - 1, n_packets, cfg, seed)
    return aggregate([compute_metrics(t, topo) for t in traces])


def _payload(n, seed):
    return [int(b) for b in make_rng(seed).integers(0, 2, n)]


def test_criterion_01_latency_bound_64_bits():
    topo = build_grid(4, 4, 50)
    t0 = time.perf_counter()
    tr = run_packet(topo, _payload(63, 1), QUIET, seed=1)
    elapsed = time.perf_counter() - t0
    m = compute_metrics(tr, topo)
    D = m.latency_e2e_s
    h = 3
    one_hop = math.hypot(50, 50) / SPEED_OF_LIGHT
    upper = 630e-6 + h * (one_hop + QUIET.window_L_s)
    ok = m.ber_avg == 0 and 630e-6 <= D <= upper and D <= 640e-6 and elapsed < 10
    report(1, "latency bound", ok,
           f"D={D * 1e6:.3f} us, bound [630, {upper * 1e6:.3f}] us, BER={m.ber_avg}, runtime {elapsed:.1f} s")


def test_criterion_02_latency_512_bits():
    topo = build_grid(4, 4, 50)
    t0 = time.perf_counter()
    tr = run_packet(topo, _payload(511, 2), QUIET, seed=2)
    elapsed = time.perf_counter() - t0
    D = compute_metrics(tr, topo).latency_e2e_s
    base = 511 * TS
    ok = abs(D - base) <= 0.005 * base and 0 <= D - base <= 10e-6 and elapsed < 60
    report(2, "512-bit latency", ok,
           f"D={D * 1e3:.5f} ms, hop term {(D - base) * 1e6:.3f} us, runtime {elapsed:.1f} s")


def test_criterion_03_per_hop_scaling():
    topo = build_grid(8, 8, 100)
    s = _summary(topo, 64, 20, CFG, seed=3)
    hops = sorted(s.hop_latency_s)
    lat = [s.hop_latency_s[h] for h in hops]
    steps = np.diff(lat)
    rel = steps.max() / s.latency_mean_s
    ok = hops == list(range(1, 8)) and bool(np.all(steps >= 0)) and rel <= 0.01
    report(3, "per-hop scaling", ok,
           f"per-hop increase {np.mean(steps) * 1e6:.3f} us mean, max {rel * 100:.3f} % of "
           f"{s.latency_mean_s * 1e6:.2f} us, monotone={bool(np.all(steps >= 0))}")


def test_criterion_04_ber_vs_distance():
    t0 = time.perf_counter()
    ber = {}
    for d in (50, 100, 150, 200):
        ber[d] = _summary(build_grid(4, 4, d), 64, 100, CFG, seed=4).ber_avg
    elapsed = time.perf_counter() - t0
    vals = list(ber.values())
    monotone = all(a <= b for a, b in zip(vals, vals[1:]))
    ok = monotone and ber[50] == 0 and elapsed < 600
    report(4, "BER vs distance", ok,
           ", ".join(f"BER({d} m)={b:.5f}" for d, b in ber.items())
           + f", non-decreasing={monotone}, runtime {elapsed:.0f} s")


def test_criterion_05_ber_vs_density():
    results = []
    for seed in (51, 52, 53):
        bers = [_summary(build_grid(r, r, 75), 64, 100, CFG, seed=seed).ber_avg for r in (4, 6, 8)]
        results.append(bers)
    ok = all(a <= b for bers in results for a, b in zip(bers, bers[1:]))
    detail = "; ".join("N=16/36/64: " + "/".join(f"{b:.4f}" for b in bers) for bers in results)
    report(5, "BER vs density", ok, detail)


def test_criterion_06_noise_calibration():
    w = Waveform(np.zeros(1_000_000), CFG.baseband_sample_rate_hz)
    x = add_noise(w, CFG, make_rng(6)).samples
    p = watts_to_dbm(inband_power_w(x, CFG.baseband_sample_rate_hz, CFG.signal_bandwidth_hz))
    report(6, "noise calibration", abs(p + 98.0) <= 0.1, f"in-band power {p:.3f} dBm")


def test_criterion_07_link_budget():
    topo = build_grid(1, 2, 100)
    path = path_model(topo, 0, 1, QUIET)
    fs = QUIET.baseband_sample_rate_hz
    pulse = Waveform(tx_pulse(QUIET), fs)
    rx = superpose([(TxEvent(0, 0.0, 0.0), pulse)], {0: path}, (0.0, QUIET.window_L_s), QUIET)
    # pulse power = energy / (energy per watt of transmit power)
    p_rx = watts_to_dbm(rx.energy() / (pulse.energy() / 1e-3))
    dec = detect_symbol(rx, QUIET)
    delay = path.delay_s * fs + (SHAPING_TAPS - 1) // 2 + group_delay_samples(QUIET)
    expected = math.ceil(delay / QUIET.buffer_samples)
    ok = abs(p_rx + 80.05) <= 0.2 and dec.bit == 1 and dec.buffer_index == expected
    report(7, "link budget", ok,
           f"received {p_rx:.3f} dBm, detected in buffer {dec.buffer_index} "
           f"(expected {expected} for {delay:.2f} samples of delay)")


def test_criterion_08_frame_delivery_ratio():
    fdr = frame_delivery_ratio(0.0004, 32)
    report(8, "frame delivery ratio", abs(fdr - 0.98729) <= 1e-5,
           f"(1-0.0004)^32 = {fdr:.7f}, target 0.98729 +/- 1e-5")


def test_criterion_09_determinism(tmp_path):
    spec = builtin_spec("fig5", n_packets=2)
    paths = []
    for k, threads in enumerate((1, 1, 2)):
        p = tmp_path / f"run{k}.csv"
        write_table(run_experiment(spec, seed=9, threads=threads), p)
        paths.append(p)
    blobs = [p.read_bytes() for p in paths]
    ok = blobs[0] == blobs[1] == blobs[2]
    report(9, "determinism", ok, f"3 runs of fig5 ({len(blobs[0])} bytes), threads 1/1/2 identical={ok}")


def test_criterion_10_detector_oracle():
    rng = make_rng(10)
    H = history_samples(CFG)
    agree = checked = skipped = 0
    while checked < 1000:
        seg, determinate = random_buffer_case(rng, CFG)
        if not determinate:
            skipped += 1
            continue
        checked += 1
        agree += process_buffer(waveform(seg[H:], CFG), CFG, history=seg[:H]) == envelope_vote_oracle(seg, CFG)
    report(10, "detector oracle", agree == checked,
           f"{agree}/{checked} agree ({skipped} near-threshold cases excluded)")
