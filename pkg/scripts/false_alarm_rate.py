"""Measure the detector's per-buffer false-alarm rate on receiver noise alone.

    python scripts/false_alarm_rate.py --buffers 1000000
"""

import argparse
import math

import numpy as np

from symflood import SimConfig
from symflood.core import dbm_to_watts, make_rng
from symflood.detector import history_samples, majority, vote_counts
from symflood.phy import bandlimited_noise


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--buffers", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sensitivity-dbm", type=float, default=-90.0)
    args = ap.parse_args()

    cfg = SimConfig(rx_sensitivity_dbm=args.sensitivity_dbm)
    H, nb = history_samples(cfg), cfg.buffer_samples
    rng = make_rng(args.seed)
    fired = 0
    block = 100_000
    for b0 in range(0, args.buffers, block):
        n = min(block, args.buffers - b0)
        x = bandlimited_noise(n * nb + H, cfg, rng)
        idx = (np.arange(n) * nb)[:, None] + np.arange(H + nb)[None, :]
        fired += int(majority(vote_counts(x[idx], cfg)).sum())
    rate = fired / args.buffers
    tail = math.exp(-dbm_to_watts(cfg.rx_sensitivity_dbm) / dbm_to_watts(cfg.rx_noise_dbm))
    print(f"false alarms: {fired}/{args.buffers} = {rate:.3e} per buffer")
    print(f"single-sample exceedance probability: {tail:.3e}")
    # buffers a synced node evaluates per 64-bit packet, at most
    print(f"expected false 1s per node per 64-bit packet: <= {rate * 64 * cfg.detections_per_window:.3f}")


if __name__ == "__main__":
    main()
