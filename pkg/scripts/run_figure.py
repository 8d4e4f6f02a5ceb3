"""Run one built-in sweep and render its figure.

    python scripts/run_figure.py fig5 --trials 20 --out-dir results
"""

import argparse
from pathlib import Path

from symflood.experiments import builtin_spec, emit_plots, list_experiments, run_experiment, write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("experiment", choices=list_experiments())
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    args = ap.parse_args()

    spec = builtin_spec(args.experiment, n_packets=args.trials)
    rows = run_experiment(spec, seed=args.seed, threads=args.threads)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_table(rows, args.out_dir / f"{spec.id}.csv")
    for path in emit_plots(rows, args.out_dir):
        print(path)
    for r in rows:
        print(f"d={r['grid_d_m']:>4} m  N={r['n_nodes']:>3}  bits={r['packet_bits']:>4}  "
              f"BER={float(r['ber_avg']):.5f}  D={float(r['latency_mean_us']):.2f} us")


if __name__ == "__main__":
    main()
