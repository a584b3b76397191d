"""Causal structure, regions and grid functions."""

import numpy as np
import pytest

from kngreen import (
    CellSet,
    GridFunction,
    GridSpec,
    Region,
    Topology,
    admissible_sources,
    causal_set,
    pairing,
    support,
)


def brute_future_circle(grid, seed_cells):
    """Independent cone oracle: breadth-first unit-speed propagation."""
    reach = set(seed_cells)
    frontier = set(seed_cells)
    while frontier:
        new = set()
        for n, j in frontier:
            if n + 1 < grid.nt:
                for dj in (-1, 0, 1):
                    cell = (n + 1, (j + dj) % grid.nx)
                    if cell not in reach:
                        new.add(cell)
        reach |= new
        frontier = new
    return reach


def test_cone_matches_breadth_first_oracle():
    grid = GridSpec(8, 6, 0.5, 0.5)
    rng = np.random.default_rng(0)
    for _ in range(10):
        cells = [(int(rng.integers(0, 8)), int(rng.integers(0, 6)))
                 for _ in range(3)]
        seed = CellSet.from_cells(grid, cells)
        got = set(causal_set(grid, seed, "future"))
        assert got == brute_future_circle(grid, cells)


def test_cone_order_duality():
    # x in J+(y) iff y in J-(x), exhaustively on a small grid
    grid = GridSpec(6, 4, 1.0, 1.0)
    cells = [(n, j) for n in range(6) for j in range(4)]
    for y in cells:
        fut = causal_set(grid, CellSet.from_cells(grid, [y]), "future")
        for x in cells:
            past_x = causal_set(grid, CellSet.from_cells(grid, [x]), "past")
            assert (x in fut) == (y in past_x)


def test_cone_idempotent_and_monotone():
    grid = GridSpec(10, 8, 0.5, 0.5)
    seed = CellSet.from_cells(grid, [(2, 3), (5, 7)])
    cone = causal_set(grid, seed, "future")
    again = causal_set(grid, cone, "future")
    assert cone == again
    assert seed.issubset(cone)


def test_cone_union_additivity():
    grid = GridSpec(10, 8, 0.5, 0.5)
    a = CellSet.from_cells(grid, [(2, 1)])
    b = CellSet.from_cells(grid, [(4, 6)])
    joint = causal_set(grid, a | b, "past")
    assert joint == causal_set(grid, a, "past") | causal_set(grid, b, "past")


def test_null_square_cone_is_quadrant():
    grid = GridSpec(8, 8, 0.5, 0.5, Topology.NULL_SQUARE)
    seed = CellSet.from_cells(grid, [(3, 4)])
    fut = causal_set(grid, seed, "future")
    assert set(fut) == {(i, j) for i in range(3, 8) for j in range(4, 8)}
    past = causal_set(grid, seed, "past")
    assert set(past) == {(i, j) for i in range(4) for j in range(5)}


def test_grid_invariants():
    with pytest.raises(ValueError):
        GridSpec(4, 8, 0.5, 0.5)
    with pytest.raises(ValueError):
        GridSpec(10, 8, 1.0, 0.5)          # dt > dx
    with pytest.raises(ValueError):
        GridSpec(10, 8, 0.25, 0.5, Topology.NULL_SQUARE)   # du != dv


def test_region_rejects_margin_rows():
    grid = GridSpec(10, 8, 0.5, 0.5)
    with pytest.raises(ValueError):
        Region.from_rect(grid, (1, 4), (2, 5))
    with pytest.raises(ValueError):
        Region.from_rect(grid, (3, 8), (2, 5))
    region = Region.from_rect(grid, (3, 6), (2, 5))
    assert region.size == 16


def test_region_extract_embed_roundtrip(rng):
    grid = GridSpec(10, 8, 0.5, 0.5)
    region = Region.from_rect(grid, (2, 5), (1, 4))
    vec = rng.standard_normal(region.size) + 1j * rng.standard_normal(region.size)
    f = region.embed(vec)
    assert np.allclose(region.extract(f), vec)
    assert support(f).issubset(region.cells)


def test_support_and_admissible():
    grid = GridSpec(10, 8, 0.5, 0.5)
    f = GridFunction.impulse(grid, (4, 2), 3.0)
    assert set(support(f)) == {(4, 2)}
    adm = admissible_sources(grid)
    assert len(adm) == (10 - 4) * 8
    assert (1, 0) not in adm and (2, 0) in adm and (7, 5) in adm


def test_pairing_bilinear_weighted():
    grid = GridSpec(6, 4, 0.25, 0.5)
    f = GridFunction.impulse(grid, (2, 1), 2.0 + 1j)
    g = GridFunction.impulse(grid, (2, 1), 3.0)
    assert pairing(f, g) == pytest.approx((2 + 1j) * 3 * 0.125)


def test_time_reversal_involution(rng):
    grid = GridSpec(8, 6, 0.5, 0.5)
    f = GridFunction(grid, rng.standard_normal(grid.shape))
    assert np.array_equal(f.time_reversed().time_reversed().values, f.values)
