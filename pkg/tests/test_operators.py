"""Stencils, kernel operators, families and bilinear duals."""

import numpy as np
import pytest

from kngreen import (
    GridFunction,
    GridSpec,
    Region,
    Topology,
    dual,
    make_kernel_family,
    make_klein_gordon,
    make_multiplication,
    make_null_wave,
    make_rank_one,
    pairing,
    support,
)
from kngreen.green import assemble_operator_matrix, assembly_cells
from kngreen import recipes


def test_kg_stencil_on_quadratic_time_profile():
    # u(n, j) = (n*dt)^2 has exact second time difference 2 and no x variation
    grid = GridSpec(8, 6, 0.5, 0.5)
    t = grid.times()
    u = GridFunction(grid, np.tile((t ** 2)[:, None], (1, 6)))
    P = make_klein_gordon(grid, mass=0.0)
    out = P(u).values
    assert np.allclose(out[1:-1], 2.0)
    assert np.all(out[0] == 0) and np.all(out[-1] == 0)


def test_kg_mass_and_potential_terms(rng):
    grid = GridSpec(8, 6, 0.5, 0.5)
    V = GridFunction(grid, rng.standard_normal(grid.shape))
    u = GridFunction(grid, rng.standard_normal(grid.shape))
    P0 = make_klein_gordon(grid, mass=0.0)
    P = make_klein_gordon(grid, mass=2.0, potential=V)
    diff = (P(u) - P0(u)).values
    expected = np.zeros(grid.shape, dtype=complex)
    expected[1:-1] = (4.0 + V.values[1:-1]) * u.values[1:-1]
    assert np.allclose(diff, expected)


def test_null_wave_product_stencil():
    grid = GridSpec(6, 6, 0.5, 0.5, Topology.NULL_SQUARE)
    P = make_null_wave(grid)
    u = GridFunction.impulse(grid, (2, 3))
    out = P(u).values * grid.weight
    expected = np.zeros(grid.shape)
    expected[2, 3] = 1.0
    expected[3, 3] = -1.0
    expected[2, 4] = -1.0
    expected[3, 4] = 1.0
    assert np.allclose(out, expected)


def test_rank_one_kernel_has_rank_one():
    sc = recipes.rank_one_scenario()
    matrix = sc.family.evaluate(1.0).matrix
    svals = np.linalg.svd(matrix, compute_uv=False)
    assert svals[0] > 0
    assert svals[1] <= 1e-14 * svals[0]


def test_rank_one_action_matches_pairing():
    sc = recipes.rank_one_scenario()
    f, h = sc.extras["f"], sc.extras["h"]
    A = sc.family.evaluate(1.0)
    rng = np.random.default_rng(0)
    phi = GridFunction(sc.grid, rng.standard_normal(sc.grid.shape))
    expected = -pairing(h, phi) * f
    assert (A(phi) - expected).norm_inf() <= 1e-13 * expected.norm_inf()


def test_multiplication_is_local(rng):
    sc = recipes.multiplication_scenario(seed=2)
    V = sc.extras["V"]
    A = sc.family.evaluate(1.0)
    phi = GridFunction(sc.grid, rng.standard_normal(sc.grid.shape))
    assert np.allclose(A(phi).values, V.values * phi.values)
    assert sc.family.support_nonincreasing


def test_kernel_kills_off_region_functions(kernel_scenario):
    sc = kernel_scenario
    A = sc.family.evaluate(0.7)
    off = GridFunction.impulse(sc.grid, (1, 0))
    assert A(off).norm_inf() == 0.0
    assert support(A(GridFunction(sc.grid, np.ones(sc.grid.shape)))).issubset(
        sc.region.cells)


def test_family_polynomial_in_lambda(kernel_scenario):
    fam = kernel_scenario.family
    lam = 0.3 + 0.2j
    direct = fam.evaluate(lam).matrix
    manual = sum(lam ** (k + 1) * rho for k, rho in enumerate(fam.coefficients))
    assert np.allclose(direct, manual)
    assert np.all(fam.evaluate(0.0).matrix == 0)


def test_dual_is_involution_and_contravariant(rng):
    grid = GridSpec(10, 8, 0.5, 0.5)
    region = Region.from_rect(grid, (3, 6), (2, 5))
    mat = rng.standard_normal((region.size, region.size)) \
        + 1j * rng.standard_normal((region.size, region.size))
    fam = make_kernel_family(region, [mat])
    A = fam.evaluate(1.0)
    At = dual(A)
    assert np.array_equal(dual(At).matrix, A.matrix)
    # <A^t f, g> = <f, A g> for the bilinear pairing
    f = GridFunction(grid, rng.standard_normal(grid.shape))
    g = GridFunction(grid, rng.standard_normal(grid.shape))
    lhs = pairing(At(f), g)
    rhs = pairing(f, A(g))
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_diffop_dual_pairing(rng):
    # <P^t f, g> = <f, P g> on the margin-free block (boundary-supported
    # functions have no transpose counterpart on a finite grid)
    for op in (make_klein_gordon(GridSpec(10, 8, 0.5, 0.5), mass=1.0),
               make_null_wave(GridSpec(10, 10, 0.5, 0.5, Topology.NULL_SQUARE))):
        grid = op.grid
        cells = assembly_cells(grid)
        M = assemble_operator_matrix(op, cells)
        Mt = assemble_operator_matrix(dual(op), cells)
        assert np.abs(Mt - M.T).max() <= 1e-12 * np.abs(M).max()


def test_nihilo_annihilates_constructed_products():
    sc = recipes.nihilo_scenario(33)
    A = sc.family.evaluate(1.0)
    for phi in recipes.nihilo_kernel_vectors(sc):
        resid = (sc.op(phi) + A(phi)).norm_inf()
        assert resid == 0.0


def test_nihilo_range_in_region():
    sc = recipes.nihilo_scenario(33)
    A = sc.family.evaluate(1.0)
    rng = np.random.default_rng(0)
    phi = GridFunction(sc.grid, rng.standard_normal(sc.grid.shape))
    assert support(A(phi)).issubset(sc.region.cells)


def test_rank_one_requires_region_support():
    grid = GridSpec(10, 8, 0.5, 0.5)
    region = Region.from_rect(grid, (3, 6), (2, 5))
    inside = GridFunction.impulse(grid, (4, 3))
    outside = GridFunction.impulse(grid, (2, 0))
    with pytest.raises(ValueError):
        make_rank_one(outside, inside, region)
    make_rank_one(inside, inside, region)


def test_multiplication_requires_region_support():
    grid = GridSpec(10, 8, 0.5, 0.5)
    region = Region.from_rect(grid, (3, 6), (2, 5))
    V = GridFunction(grid, np.ones(grid.shape))
    with pytest.raises(ValueError):
        make_multiplication(V, region)
