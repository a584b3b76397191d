"""Shared fixtures for the verification suite."""

import numpy as np
import pytest

from kngreen import (
    CausalSolver,
    GridSpec,
    Topology,
    make_klein_gordon,
    make_null_wave,
)
from kngreen import recipes


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def kg_grid():
    return recipes.kg_grid(16, 10)


@pytest.fixture
def kg_solver(kg_grid):
    return CausalSolver(make_klein_gordon(kg_grid, mass=1.0))


@pytest.fixture
def null_grid():
    return GridSpec(10, 10, 0.5, 0.5, Topology.NULL_SQUARE)


@pytest.fixture
def null_solver(null_grid):
    return CausalSolver(make_null_wave(null_grid))


@pytest.fixture
def rank_one_scenario():
    return recipes.rank_one_scenario()


@pytest.fixture
def kernel_scenario():
    return recipes.random_kernel_scenario(seed=3)
