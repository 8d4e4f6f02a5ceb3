"""Grid deployments with the initiator in a corner."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Topology:
    node_positions: tuple[tuple[float, float], ...]
    initiator_index: int
    grid_spacing_d_m: float
    rows: int
    cols: int
    area_side_m: float

    @property
    def n_nodes(self) -> int:
        return len(self.node_positions)

    def positions(self) -> np.ndarray:
        return np.asarray(self.node_positions, dtype=float).reshape(-1, 2)

    def grid_index(self, node: int) -> tuple[int, int]:
        self._check(node)
        return divmod(node, self.cols)

    def _check(self, node: int) -> None:
        if not 0 <= node < self.n_nodes:
            raise IndexError(f"node {node} not in topology of {self.n_nodes} nodes")


def build_grid(rows: int, cols: int, spacing: float, area_side: float = 2000.0) -> Topology:
    """Row-major lattice anchored at the origin corner; node 0 is the initiator."""
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and one column")
    if spacing <= 0:
        raise ValueError("grid spacing must be positive")
    if (max(rows, cols) - 1) * spacing > area_side:
        raise ValueError(
            f"{rows}x{cols} grid at {spacing} m spans more than the {area_side} m area"
        )
    pos = tuple((c * spacing, r * spacing) for r in range(rows) for c in range(cols))
    return Topology(pos, 0, float(spacing), rows, cols, float(area_side))


def hop_count(topo: Topology, node: int) -> int:
    """Chebyshev distance on grid indices from the initiator.

    This is a reporting label; who actually decodes whom is left to the PHY.
    """
    r, c = topo.grid_index(node)
    r0, c0 = topo.grid_index(topo.initiator_index)
    return max(abs(r - r0), abs(c - c0))


def hop_counts(topo: Topology) -> np.ndarray:
    return np.array([hop_count(topo, i) for i in range(topo.n_nodes)], dtype=int)


def pairwise_distance(topo: Topology, a: int, b: int) -> float:
    topo._check(a)
    topo._check(b)
    (xa, ya), (xb, yb) = topo.node_positions[a], topo.node_positions[b]
    return math.hypot(xa - xb, ya - yb)


def distance_matrix(topo: Topology) -> np.ndarray:
    p = topo.positions()
    return np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])


def write_topology_csv(topo: Topology, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "x_m", "y_m", "hops"])
        for i, (x, y) in enumerate(topo.node_positions):
            w.writerow([i, repr(float(x)), repr(float(y)), hop_count(topo, i)])
