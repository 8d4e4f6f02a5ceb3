"""Command line entry point: ``symflood {run,list-experiments,reproduce,plot}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .experiments import (
    builtin_spec,
    emit_plots,
    list_experiments,
    load_spec,
    read_table,
    run_experiment,
    write_table,
)

log = logging.getLogger("symflood")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (default: spec seed or 0)")
    p.add_argument("--trials", type=int, default=None, help="packets per sweep cell")
    p.add_argument("--out-dir", type=Path, default=Path("results"))
    p.add_argument("--threads", type=int, default=1, help="worker processes; never changes results")
    p.add_argument("--plot", action="store_true", help="also write an SVG next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symflood", description="Symbol-synchronous flooding simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run an experiment spec file (YAML)")
    p.add_argument("spec_file", type=Path)
    _add_run_flags(p)

    sub.add_parser("list-experiments", help="list built-in experiments")

    p = sub.add_parser("reproduce", help="run a built-in experiment with default parameters")
    p.add_argument("experiment_id", choices=list_experiments())
    _add_run_flags(p)

    p = sub.add_parser("plot", help="render SVG figures from a result CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--out-dir", type=Path, default=None)
    return ap


def _execute(spec, args) -> int:
    if args.trials is not None:
        spec = replace(spec, n_packets=args.trials)
    seed = spec.seed if args.seed is None else args.seed
    args.out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    rows = run_experiment(spec, seed=seed, threads=args.threads)
    out = args.out_dir / f"{spec.id}.csv"
    write_table(rows, out)
    log.info("wrote %s (%d rows, %.1f s)", out, len(rows), time.time() - t0)
    print(out)
    if args.plot:
        for path in emit_plots(rows, args.out_dir):
            print(path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.cmd == "list-experiments":
        for exp_id in list_experiments():
            spec = builtin_spec(exp_id)
            print(f"{exp_id}\t{len(spec.cells())} cells\t{spec.n_packets} packets/cell")
        return 0
    if args.cmd == "run":
        return _execute(load_spec(args.spec_file), args)
    if args.cmd == "reproduce":
        return _execute(builtin_spec(args.experiment_id), args)
    if args.cmd == "plot":
        rows = read_table(args.csv)
        try:
            paths = emit_plots(rows, args.out_dir or args.csv.parent)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for path in paths:
            print(path)
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
