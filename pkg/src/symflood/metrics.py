"""BER, latency and delivery figures derived from packet traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import PacketTrace
from .topology import Topology, hop_count

SUMMARY_COLUMNS = (
    "experiment_id",
    "grid_d_m",
    "n_nodes",
    "packet_bits",
    "trials",
    "ber_avg",
    "latency_mean_us",
    "latency_p99_us",
)
HOP_COLUMNS = ("hops", "latency_mean_us")


@dataclass(frozen=True)
class TrialMetrics:
    """Per-trial figures.

    Latencies are measured from the initiator's first (preamble) emission
    to a node's last-symbol decision.  Nodes that never synchronized have no
    latency entry; ``latency_e2e_s`` is NaN when no node synchronized.
    """

    ber_per_node: dict[int, float]
    ber_avg: float
    latency_e2e_s: float
    latency_per_node: dict[int, float]
    hops_per_node: dict[int, int]


def _node_ber(bits: Sequence[int], tx_bits: Sequence[int]) -> float:
    payload = tx_bits[1:]
    if not payload:
        return 0.0
    if len(bits) != len(tx_bits):
        # never synchronized: output reads as all zeros
        return sum(payload) / len(payload)
    return sum(a != b for a, b in zip(bits[1:], payload)) / len(payload)


def compute_metrics(trace: PacketTrace, topo: Topology) -> TrialMetrics:
    ber = {}
    lat = {}
    hops = {}
    for node in sorted(trace.per_node_bits):
        if node == topo.initiator_index:
            continue
        ber[node] = _node_ber(trace.per_node_bits[node], trace.tx_bits)
        hops[node] = hop_count(topo, node)
        events = trace.per_node_events.get(node, [])
        if len(events) == trace.n_bits:
            lat[node] = events[-1].decision_time_s - trace.initiator_start_s
    ber_avg = float(np.mean(list(ber.values()))) if ber else 0.0
    d = max(lat.values()) if lat else math.nan
    return TrialMetrics(ber, ber_avg, d, lat, hops)


def frame_delivery_ratio(ber: float, frame_bits: int) -> float:
    """Probability that a frame of ``frame_bits`` independent bits arrives intact."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError(f"ber must lie in [0, 1], got {ber!r}")
    if frame_bits < 0:
        raise ValueError("frame_bits must be non-negative")
    return (1.0 - ber) ** frame_bits


@dataclass(frozen=True)
class Summary:
    trials: int
    ber_avg: float
    latency_mean_s: float
    latency_p99_s: float
    hop_latency_s: dict[int, float]


def aggregate(metrics: Sequence[TrialMetrics]) -> Summary:
    if not metrics:
        raise ValueError("cannot aggregate an empty list of trials")
    ber = float(np.mean([m.ber_avg for m in metrics]))
    d = np.array([m.latency_e2e_s for m in metrics], dtype=float)
    d = d[np.isfinite(d)]
    mean = float(d.mean()) if d.size else math.nan
    p99 = float(np.percentile(d, 99)) if d.size else math.nan
    groups: dict[int, list[float]] = {}
    for m in metrics:
        for node, t in m.latency_per_node.items():
            groups.setdefault(m.hops_per_node[node], []).append(t)
    hop_table = {h: float(np.mean(v)) for h, v in sorted(groups.items())}
    return Summary(len(metrics), ber, mean, p99, hop_table)


def fmt_number(x: float) -> str:
    # fixed formatting keeps CSV output byte-stable across runs
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(x, ".9g")


def summary_row(
    summary: Summary, experiment_id: str, grid_d_m: float, n_nodes: int, packet_bits: int
) -> dict[str, str]:
    return {
        "experiment_id": experiment_id,
        "grid_d_m": fmt_number(float(grid_d_m)),
        "n_nodes": str(n_nodes),
        "packet_bits": str(packet_bits),
        "trials": str(summary.trials),
        "ber_avg": fmt_number(summary.ber_avg),
        "latency_mean_us": fmt_number(summary.latency_mean_s * 1e6),
        "latency_p99_us": fmt_number(summary.latency_p99_s * 1e6),
    }


def write_summary_csv(rows: Sequence[dict[str, str]], path: str | Path, extra=()) -> None:
    cols = list(SUMMARY_COLUMNS) + [c for c in extra if c not in SUMMARY_COLUMNS]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in cols})


def write_hop_csv(summary: Summary, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOP_COLUMNS)
        for h, t in summary.hop_latency_s.items():
            w.writerow([h, fmt_number(t * 1e6)])
