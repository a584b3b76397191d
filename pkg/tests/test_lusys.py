"""Block LU factorization of coupled systems."""

import numpy as np
import pytest

from kngreen import (
    GridFunction,
    NearSingularError,
    lu_factor,
    make_kernel_family,
    make_klein_gordon,
    modified_green,
    pairing,
    system_green,
    verify_system,
)
from kngreen.lusys import BlockSystem
from kngreen.cli import _random_system
from kngreen import recipes


@pytest.fixture
def base_scenario():
    return recipes.random_kernel_scenario(seed=9, nt=16, nx=10)


def _uncoupled(base_scenario, lam):
    region = base_scenario.region
    grid = base_scenario.grid
    rng = np.random.default_rng(4)
    size = region.size
    scale = 0.2 / (size * grid.weight)
    diag = []
    for mass in (0.0, 1.0):
        P = make_klein_gordon(grid, mass=mass)
        coeff = scale * (rng.standard_normal((size, size))
                         + 1j * rng.standard_normal((size, size)))
        diag.append((P, make_kernel_family(region, [coeff])))
    return BlockSystem(diag, {}, region, lam)


def test_single_block_matches_modified_green(base_scenario, rng):
    sc = base_scenario
    lam = 0.2
    system = BlockSystem([(sc.op, sc.family)], {}, sc.region, lam)
    fact = lu_factor(system, "+")
    f = recipes.random_source(sc.grid, rng)
    got = system_green(fact, [f])[0]
    want = modified_green(sc.solver, sc.family, lam, "+", f)
    assert (got - want).norm_inf() <= 1e-12 * want.norm_inf()


def test_uncoupled_system_is_diagonal(base_scenario, rng):
    lam = 0.15
    system = _uncoupled(base_scenario, lam)
    fact = lu_factor(system, "-")
    F = [recipes.random_source(base_scenario.grid, rng) for _ in range(2)]
    Phi = system_green(fact, F)
    for i in range(2):
        from kngreen import CausalSolver

        want = modified_green(CausalSolver(system.diag[i][0]),
                              system.diag[i][1], lam, "-", F[i])
        assert (Phi[i] - want).norm_inf() <= 1e-12 * want.norm_inf()


def test_schur_block_matches_brute_force(base_scenario):
    sc = base_scenario
    lam = 0.3
    system = _random_system(sc, 2, lam, np.random.default_rng(8))
    fact = lu_factor(system, "+")
    region = system.region
    S = system.coupling(1, 0)
    R = system.coupling(0, 1)
    cols = np.empty((region.size, region.size), dtype=complex)
    for q, cell in enumerate(region.cell_list):
        e = GridFunction.impulse(sc.grid, cell)
        col = modified_green(system.solvers[0], system.diag[0][1], lam, "+", e)
        cols[:, q] = region.extract(col)
    brute = (system.diag[1][1].evaluate(lam).value_matrix
             - S.value_matrix @ cols @ R.value_matrix)
    stored = fact.rest.family.evaluate(lam).value_matrix
    assert np.abs(brute - stored).max() <= 1e-10 * max(np.abs(brute).max(), 1.0)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("sign", ["+", "-"])
def test_random_systems_two_sided_inverse(base_scenario, n, sign):
    system = _random_system(base_scenario, n, 0.2 + 0.1j,
                            np.random.default_rng(n))
    rep = verify_system(system, sign, trials=5, rng=np.random.default_rng(n + 50))
    assert rep.passed, rep.metrics
    assert max(rep.metrics.values()) <= 1e-9
    assert rep.details["block cone containment"]


def test_first_source_only_and_zero_couplings(base_scenario, rng):
    lam = 0.1
    system = _uncoupled(base_scenario, lam)
    fact = lu_factor(system, "+")
    f = recipes.random_source(base_scenario.grid, rng)
    zero = GridFunction.zeros(base_scenario.grid)
    Phi = system_green(fact, [f, zero])
    assert Phi[1].norm_inf() == 0.0


def test_near_singular_reports_stage(base_scenario):
    from kngreen import CausalSolver, KernelFamily, make_rank_one

    healthy = recipes.random_kernel_scenario(seed=2, nt=16, nx=10)
    region = healthy.region
    grid = healthy.grid
    # a rank-one second stage whose exceptional point we can place exactly
    first = region.cell_list[0]
    last_row = max(c[0] for c in region.cell_list)
    f = GridFunction.impulse(grid, first)
    h = GridFunction.impulse(grid, (last_row, first[1]))
    P2 = make_klein_gordon(grid, mass=0.5)
    nu = pairing(h, CausalSolver(P2).retarded(f))
    assert abs(nu) > 0
    singular = KernelFamily(region, (make_rank_one(f, h, region).matrix,))
    system = BlockSystem([(healthy.op, healthy.family), (P2, singular)],
                         {}, region, 1.0 / nu)
    with pytest.raises(NearSingularError) as err:
        lu_factor(system, "+")
    assert err.value.stage == 2


def test_both_orderings_pass_independently(base_scenario):
    system = _random_system(base_scenario, 2, 0.25, np.random.default_rng(12))
    for sign in "+-":
        rep = verify_system(system, sign, trials=3,
                            rng=np.random.default_rng(77))
        assert rep.passed
