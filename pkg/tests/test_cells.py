import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenetopics.cells import CellIndex, GridBounds, NeighborhoodSpec, cell_of, neighbors


@pytest.mark.parametrize("x, y, t, expected", [
    (0, 0, 0, (0, 0, 0)),
    (127, 128, 5, (0, 1, 5)),
    (300, 300, 2, (2, 2, 2)),
])
def test_cell_of(x, y, t, expected):
    assert cell_of(x, y, t, 128) == CellIndex(*expected)


def test_cell_size_zero():
    with pytest.raises(ValueError):
        cell_of(1, 1, 1, 0)


def brute_neighbors(c, rs, rt, bounds):
    # every cell of the clipped grid, filtered by the L-inf / window test
    return {
        CellIndex(cx, cy, t)
        for cx, cy, t in itertools.product(range(bounds.nx), range(bounds.ny), range(bounds.max_t + 1))
        if abs(cx - c.cx) <= rs and abs(cy - c.cy) <= rs and abs(t - c.t) <= rt
    } | {c}


BIG = GridBounds(nx=10, ny=10, max_t=10)


def test_interior_radius_one():
    assert len(neighbors(CellIndex(5, 5, 5), NeighborhoodSpec(1, 1), BIG)) == 27


def test_radius_zero_is_identity():
    c = CellIndex(3, 4, 2)
    assert neighbors(c, NeighborhoodSpec(0, 0), BIG) == {c}


def test_corner_at_first_frame():
    got = neighbors(CellIndex(0, 0, 0), NeighborhoodSpec(1, 1), BIG)
    assert got == brute_neighbors(CellIndex(0, 0, 0), 1, 1, BIG)
    assert len(got) == 8


cells = st.builds(CellIndex, st.integers(0, 7), st.integers(0, 5), st.integers(0, 9))
specs = st.builds(NeighborhoodSpec, st.integers(0, 3), st.integers(0, 3))
bounds = GridBounds(nx=8, ny=6, max_t=9)


@given(cells, specs)
def test_matches_brute_force(c, spec):
    got = neighbors(c, spec, bounds)
    assert got == brute_neighbors(c, spec.spatial_radius, spec.temporal_radius, bounds)
    assert c in got
    assert all(0 <= n.cx < bounds.nx and 0 <= n.cy < bounds.ny and 0 <= n.t <= bounds.max_t for n in got)


@given(cells, cells, specs)
def test_symmetry(a, b, spec):
    assert (b in neighbors(a, spec, bounds)) == (a in neighbors(b, spec, bounds))


@given(st.integers(0, 3), st.integers(0, 3))
def test_interior_cardinality(rs, rt):
    c = CellIndex(10, 10, 10)
    got = neighbors(c, NeighborhoodSpec(rs, rt), GridBounds(30, 30, 30))
    assert len(got) == (2 * rs + 1) ** 2 * (2 * rt + 1)


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        NeighborhoodSpec(-1, 0)
