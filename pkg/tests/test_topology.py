import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symflood.topology import (
    build_grid,
    distance_matrix,
    hop_count,
    hop_counts,
    pairwise_distance,
    write_topology_csv,
)

grids = st.tuples(st.integers(1, 9), st.integers(1, 9), st.floats(1.0, 200.0))


def test_four_by_four_layout():
    t = build_grid(4, 4, 50)
    assert t.n_nodes == 16
    assert t.initiator_index == 0
    assert t.node_positions[0] == (0.0, 0.0)
    assert t.node_positions[5] == (50.0, 50.0)
    assert t.node_positions[15] == (150.0, 150.0)


def test_hops_on_eight_by_eight():
    t = build_grid(8, 8, 100)
    h = hop_counts(t)
    assert h.max() == 7
    assert sorted(set(h)) == list(range(8))
    # Chebyshev rings: ring k has 2k+1 nodes
    assert [int((h == k).sum()) for k in range(8)] == [2 * k + 1 for k in range(8)]


@given(grids)
def test_distance_matrix_matches_pairwise(g):
    r, c, d = g
    t = build_grid(r, c, d)
    D = distance_matrix(t)
    assert np.allclose(D, D.T)
    assert np.allclose(np.diag(D), 0)
    a, b = t.n_nodes - 1, 0
    assert D[a, b] == pytest.approx(pairwise_distance(t, a, b))
    assert D[a, b] == pytest.approx(math.hypot((c - 1) * d, (r - 1) * d))


@given(grids)
def test_hop_count_bounds(g):
    r, c, d = g
    t = build_grid(r, c, d)
    assert hop_count(t, 0) == 0
    assert hop_counts(t).max() == max(r, c) - 1


def test_grid_must_fit_area():
    with pytest.raises(ValueError):
        build_grid(9, 9, 300)
    with pytest.raises(ValueError):
        build_grid(0, 3, 10)
    with pytest.raises(ValueError):
        build_grid(3, 3, 0)


def test_bad_node_index():
    t = build_grid(2, 2, 10)
    with pytest.raises(IndexError):
        hop_count(t, 4)


def test_topology_csv(tmp_path):
    t = build_grid(2, 3, 10)
    write_topology_csv(t, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "node_id,x_m,y_m,hops"
    assert len(lines) == 7
    assert lines[6] == "5,20.0,10.0,2"
