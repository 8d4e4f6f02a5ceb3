"""Named sweep scenarios, their CSV tables and figure rendering."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import yaml

from .core import STREAM_CELL, SimConfig, config_from_dict, derive_seed, validate_config
from .engine import run_trials
from .metrics import (
    SUMMARY_COLUMNS,
    Summary,
    fmt_number,
    aggregate,
    compute_metrics,
    summary_row,
)
from .topology import build_grid

EXPERIMENT_IDS = ("fig5", "fig7", "fig8", "fig9", "custom")
GRID_KEYS = ("rows", "cols", "grid_d_m", "packet_bits")
_CFG_KEYS = {f.name for f in fields(SimConfig)}
TABLE_COLUMNS = SUMMARY_COLUMNS + ("sub_seed", "hop_latency_us")


@dataclass(frozen=True)
class ExperimentSpec:
    """A sweep: Cartesian product of distances, packet sizes and ``sweep`` values.

    ``sweep`` keys name SimConfig fields or one of rows/cols/grid_d_m/
    packet_bits.  A ``rows`` sweep without a ``cols`` sweep keeps grids square.
    """

    id: str
    grid: tuple[int, int] = (4, 4)
    distances_m: tuple[float, ...] = (50.0,)
    packet_bits_list: tuple[int, ...] = (64,)
    n_packets: int = 100
    base_config: SimConfig = field(default_factory=SimConfig)
    sweep: dict[str, tuple[Any, ...]] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        bad = []
        if self.id not in EXPERIMENT_IDS:
            bad.append(f"unknown experiment id {self.id!r}")
        if self.n_packets < 1:
            bad.append("n_packets must be >= 1")
        if any(b < 2 for b in self.packet_bits_list):
            bad.append("packet_bits must be >= 2 (preamble plus payload)")
        for k, v in self.sweep.items():
            if k not in _CFG_KEYS and k not in GRID_KEYS:
                bad.append(f"invalid sweep key {k!r}")
            if not v:
                bad.append(f"sweep {k!r} has no values")
        if bad:
            raise ValueError("; ".join(bad))
        validate_config(self.base_config)

    def cells(self) -> list[dict[str, Any]]:
        """All sweep cells in deterministic order."""
        axes: dict[str, tuple[Any, ...]] = {
            "grid_d_m": tuple(self.distances_m),
            "packet_bits": tuple(self.packet_bits_list),
        }
        axes.update({k: tuple(v) for k, v in self.sweep.items()})
        keys = list(axes)
        out = []
        for combo in itertools.product(*(axes[k] for k in keys)):
            cell = dict(zip(keys, combo))
            cell.setdefault("rows", self.grid[0])
            if "cols" not in cell:
                cell["cols"] = cell["rows"] if "rows" in self.sweep else self.grid[1]
            out.append(cell)
        return out


def builtin_spec(exp_id: str, n_packets: int | None = None, seed: int = 0) -> ExperimentSpec:
    specs = {
        "fig5": dict(
            grid=(4, 4),
            distances_m=tuple(sorted({50.0, 60.0, *range(50, 201, 25)})),
            packet_bits_list=(64,),
        ),
        "fig7": dict(grid=(4, 4), distances_m=(100.0, 200.0), packet_bits_list=(64, 128, 256, 512)),
        "fig8": dict(grid=(8, 8), distances_m=(100.0,), packet_bits_list=(64,)),
        "fig9": dict(
            grid=(4, 4),
            distances_m=(50.0, 75.0, 100.0, 125.0),
            packet_bits_list=(64,),
            sweep={"rows": (4, 5, 6, 7, 8, 9)},
        ),
    }
    if exp_id not in specs:
        raise KeyError(f"no built-in experiment {exp_id!r}; choose from {sorted(specs)}")
    kw = specs[exp_id]
    kw["distances_m"] = tuple(float(d) for d in kw["distances_m"])
    return ExperimentSpec(id=exp_id, n_packets=n_packets or 100, seed=seed, **kw)


def list_experiments() -> list[str]:
    return ["fig5", "fig7", "fig8", "fig9"]


# -- spec files --------------------------------------------------------------


def spec_to_dict(spec: ExperimentSpec) -> dict[str, Any]:
    return {
        "id": spec.id,
        "grid": list(spec.grid),
        "distances_m": list(spec.distances_m),
        "packet_bits_list": list(spec.packet_bits_list),
        "n_packets": spec.n_packets,
        "seed": spec.seed,
        "base_config": {k: v for k, v in spec.base_config.to_dict().items() if k != "data_rate_bps"},
        "sweep": {k: list(v) for k, v in spec.sweep.items()},
    }


def spec_from_dict(d: dict[str, Any]) -> ExperimentSpec:
    d = dict(d)
    known = {"id", "grid", "distances_m", "packet_bits_list", "n_packets", "seed", "base_config", "sweep"}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown spec keys: {sorted(unknown)}")
    return ExperimentSpec(
        id=d.get("id", "custom"),
        grid=tuple(int(x) for x in d.get("grid", (4, 4))),
        distances_m=tuple(float(x) for x in d.get("distances_m", (50.0,))),
        packet_bits_list=tuple(int(x) for x in d.get("packet_bits_list", (64,))),
        n_packets=int(d.get("n_packets", 100)),
        base_config=config_from_dict(d.get("base_config") or {}),
        sweep={k: tuple(v) for k, v in (d.get("sweep") or {}).items()},
        seed=int(d.get("seed", 0)),
    )


def load_spec(path: str | Path) -> ExperimentSpec:
    return spec_from_dict(yaml.safe_load(Path(path).read_text()) or {})


def save_spec(spec: ExperimentSpec, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(spec_to_dict(spec), sort_keys=False))


# -- running -----------------------------------------------------------------


def _run_cell(args) -> Summary:
    cell, base, n_packets, sub_seed = args
    cfg_changes = {k: v for k, v in cell.items() if k in _CFG_KEYS}
    cfg = replace(base, **cfg_changes) if cfg_changes else base
    topo = build_grid(int(cell["rows"]), int(cell["cols"]), float(cell["grid_d_m"]))
    traces = run_trials(topo, int(cell["packet_bits"]) - 1, n_packets, cfg, sub_seed)
    return aggregate([compute_metrics(t, topo) for t in traces])


def _hop_field(summary: Summary) -> str:
    return ";".join(f"{h}:{fmt_number(t * 1e6)}" for h, t in summary.hop_latency_s.items())


def run_experiment(
    spec: ExperimentSpec, seed: int | None = None, threads: int = 1
) -> list[dict[str, str]]:
    """Run every cell and return CSV rows (strings) in cell order.

    Cell c uses sub-seed derive_seed(seed, STREAM_CELL, c); ``threads``
    only changes wall time.
    """
    seed = spec.seed if seed is None else seed
    cells = spec.cells()
    jobs = [
        (cell, spec.base_config, spec.n_packets, derive_seed(seed, STREAM_CELL, c))
        for c, cell in enumerate(cells)
    ]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(_run_cell, jobs))
    else:
        summaries = [_run_cell(j) for j in jobs]
    rows = []
    for (cell, _, _, sub_seed), summ in zip(jobs, summaries):
        row = summary_row(
            summ, spec.id, cell["grid_d_m"], int(cell["rows"]) * int(cell["cols"]), cell["packet_bits"]
        )
        row["sub_seed"] = str(sub_seed)
        row["hop_latency_us"] = _hop_field(summ)
        for k in spec.sweep:
            if k in _CFG_KEYS:
                row[k] = str(cell[k])
        rows.append(row)
    return rows


def write_table(rows: Sequence[dict[str, str]], path: str | Path) -> None:
    cols = list(TABLE_COLUMNS)
    for r in rows:
        cols += [k for k in r if k not in cols]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in cols})


def read_table(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- plots -------------------------------------------------------------------


def _num(rows, key):
    return [float(r[key]) for r in rows]


def _parse_hops(field_: str) -> dict[int, float]:
    out = {}
    for part in filter(None, field_.split(";")):
        h, t = part.split(":")
        out[int(h)] = float(t)
    return out


def emit_plots(rows: Sequence[dict[str, str]], out_dir: str | Path) -> list[Path]:
    """Render one SVG per experiment id found in ``rows``."""
    if not rows:
        raise ValueError("cannot plot an empty result table")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed metadata keeps the SVG output reproducible
    matplotlib.rcParams["svg.hashsalt"] = "symflood"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_id: dict[str, list[dict[str, str]]] = {}
    for r in rows:
        by_id.setdefault(r["experiment_id"], []).append(r)
    written = []
    for exp_id, rs in by_id.items():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        if exp_id == "fig5":
            rs = sorted(rs, key=lambda r: float(r["grid_d_m"]))
            ber = [max(b, 1e-6) for b in _num(rs, "ber_avg")]
            ax.semilogy(_num(rs, "grid_d_m"), ber, "o-")
            ax.set_xlabel("grid distance (m)")
            ax.set_ylabel("average BER")
        elif exp_id == "fig7":
            for d in sorted({float(r["grid_d_m"]) for r in rs}):
                sub = [r for r in rs if float(r["grid_d_m"]) == d]
                sub.sort(key=lambda r: int(r["packet_bits"]))
                ax.plot(_num(sub, "packet_bits"), [v / 1e3 for v in _num(sub, "latency_mean_us")],
                        "o-", label=f"{d:g} m")
            ax.set_xlabel("packet size (bits)")
            ax.set_ylabel("latency (ms)")
            ax.legend()
        elif exp_id == "fig8":
            for r in rs:
                hops = _parse_hops(r.get("hop_latency_us", ""))
                ax.plot(list(hops), list(hops.values()), "o-", label=f"{float(r['grid_d_m']):g} m")
            ax.set_xlabel("hops")
            ax.set_ylabel("latency (us)")
            ax.legend()
        elif exp_id == "fig9":
            for d in sorted({float(r["grid_d_m"]) for r in rs}):
                sub = sorted((r for r in rs if float(r["grid_d_m"]) == d), key=lambda r: int(r["n_nodes"]))
                ax.plot(_num(sub, "n_nodes"), _num(sub, "ber_avg"), "o-", label=f"{d:g} m")
            ax.set_xlabel("number of nodes")
            ax.set_ylabel("average BER")
            ax.legend()
        else:
            ax.plot(range(len(rs)), _num(rs, "ber_avg"), "o-")
            ax.set_xlabel("cell")
            ax.set_ylabel("average BER")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"{exp_id}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written

