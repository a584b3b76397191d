"""Moller maps: invertibility, intertwining, locality and continuity."""

import numpy as np
import pytest

from kngreen import (
    CellSet,
    GridFunction,
    MollerMap,
    NearSingularError,
    causal_set,
    moller,
    moller_inverse,
    pairing,
    support,
    verify_intertwining,
)
from kngreen import recipes


def random_field(grid, rng):
    return GridFunction(grid, rng.standard_normal(grid.shape)
                        + 1j * rng.standard_normal(grid.shape))


def test_identity_at_lambda_zero(kernel_scenario, rng):
    m = MollerMap("retarded", 0.0, kernel_scenario.solver, kernel_scenario.family)
    phi = random_field(kernel_scenario.grid, rng)
    assert (moller(m, phi) - phi).norm_inf() == 0.0
    assert (moller_inverse(m, phi) - phi).norm_inf() == 0.0


def test_untouched_when_vanishing_on_region(kernel_scenario, rng):
    sc = kernel_scenario
    m = MollerMap("retarded", 0.4, sc.solver, sc.family)
    phi = random_field(sc.grid, rng)
    off = GridFunction(sc.grid, np.where(sc.region.cells.mask, 0.0, phi.values))
    assert (moller(m, off) - off).norm_inf() == 0.0


def test_round_trip_both_orders(kernel_scenario, rng):
    sc = kernel_scenario
    for direction in ("retarded", "advanced"):
        m = MollerMap(direction, 0.2 + 0.1j, sc.solver, sc.family)
        for _ in range(3):
            phi = random_field(sc.grid, rng)
            back = moller(m, moller_inverse(m, phi))
            assert (back - phi).norm_inf() <= 1e-10 * phi.norm_inf()
            forth = moller_inverse(m, moller(m, phi))
            assert (forth - phi).norm_inf() <= 1e-10 * phi.norm_inf()


def test_difference_confined_to_cone(kernel_scenario, rng):
    sc = kernel_scenario
    for direction, cone_dir in (("retarded", "future"), ("advanced", "past")):
        m = MollerMap(direction, 0.3, sc.solver, sc.family)
        phi = random_field(sc.grid, rng)
        diff = moller(m, phi) - phi
        cone = causal_set(sc.grid, sc.region.cells, cone_dir)
        assert support(diff).issubset(cone)


def test_intertwining_random_family(kernel_scenario, rng):
    sc = kernel_scenario
    for direction in ("retarded", "advanced"):
        m = MollerMap(direction, 0.15, sc.solver, sc.family)
        for _ in range(3):
            f = recipes.random_source(sc.grid, rng)
            rep = verify_intertwining(m, f)
            assert rep.passed, rep.metrics


def test_intertwining_rank_one_and_multiplication(rng):
    ro = recipes.rank_one_scenario()
    nu = pairing(ro.extras["h"], ro.solver.retarded(ro.extras["f"]))
    lam = 0.3 / nu
    m = MollerMap("retarded", lam, ro.solver, ro.family)
    rep = verify_intertwining(m, recipes.random_source(ro.grid, rng))
    assert rep.passed and max(rep.metrics.values()) <= 1e-9

    mult = recipes.multiplication_scenario(seed=5)
    m2 = MollerMap("advanced", 0.5, mult.solver, mult.family)
    rep2 = verify_intertwining(m2, recipes.random_source(mult.grid, rng))
    assert rep2.passed and max(rep2.metrics.values()) <= 1e-9


def test_near_singular_propagates(rank_one_scenario, rng):
    sc = rank_one_scenario
    nu = pairing(sc.extras["h"], sc.solver.retarded(sc.extras["f"]))
    m = MollerMap("retarded", 1.0 / nu, sc.solver, sc.family)
    phi = random_field(sc.grid, rng)
    with pytest.raises(NearSingularError):
        moller(m, phi)


def test_lambda_continuity(kernel_scenario, rng):
    sc = kernel_scenario
    phi = random_field(sc.grid, rng)
    base = moller(MollerMap("retarded", 0.2, sc.solver, sc.family), phi)
    deltas = []
    for eps in (1e-2, 1e-4, 1e-6):
        near = moller(MollerMap("retarded", 0.2 + eps, sc.solver, sc.family), phi)
        deltas.append((near - base).norm_inf())
    assert deltas[0] > deltas[1] > deltas[2]
    assert deltas[2] <= 1e-5 * phi.norm_inf()
