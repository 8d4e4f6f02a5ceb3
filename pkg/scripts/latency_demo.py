"""Noiseless flood on a grid: per-node latency and the hop table.

    python scripts/latency_demo.py --rows 4 --cols 4 --spacing 50 --bits 64
"""

import argparse

from symflood import SimConfig, build_grid, run_packet
from symflood.engine import random_payload
from symflood.metrics import aggregate, compute_metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rows", type=int, default=4)
    ap.add_argument("--cols", type=int, default=4)
    ap.add_argument("--spacing", type=float, default=50.0)
    ap.add_argument("--bits", type=int, default=64, help="packet length including the preamble")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", action="store_true", help="enable receiver noise")
    args = ap.parse_args()

    cfg = SimConfig(noise_enabled=args.noise)
    topo = build_grid(args.rows, args.cols, args.spacing)
    trace = run_packet(topo, random_payload(args.seed, args.bits - 1), cfg, args.seed)
    m = compute_metrics(trace, topo)
    print(f"nodes={topo.n_nodes}  BER={m.ber_avg:.5f}  D={m.latency_e2e_s * 1e6:.3f} us")
    for h, t in aggregate([m]).hop_latency_s.items():
        print(f"  hops={h}  latency={t * 1e6:.3f} us")


if __name__ == "__main__":
    main()
