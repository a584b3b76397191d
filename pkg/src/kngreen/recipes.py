"""Reproducible scenario builders: profiles, regions, interaction families.

All randomness flows through explicit numpy Generators seeded by the caller,
so a scenario is fully determined by its parameters.  Smooth profiles are
built from the standard bump exp(-1/(1-t^2)); plateau profiles are exactly
one on an inner interval and exactly zero outside an outer one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    CellSet,
    GridFunction,
    GridSpec,
    Region,
    Topology,
    admissible_sources,
)
from .operators import (
    DiffOp,
    KernelFamily,
    NihiloFamily,
    make_kernel_family,
    make_klein_gordon,
    make_multiplication,
    make_nihilo_A,
    make_null_wave,
    make_rank_one,
)
from .green import CausalSolver


def bump(t: np.ndarray) -> np.ndarray:
    """exp(-1/(1-t^2)) on |t| < 1, zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def bump_profile(coords: np.ndarray, center: float, halfwidth: float) -> np.ndarray:
    return bump((np.asarray(coords, dtype=float) - center) / halfwidth)


def plateau_profile(coords: np.ndarray, inner: float, outer: float,
                    center: float = 0.0) -> np.ndarray:
    """Smooth profile equal to 1 on |x-center| <= inner, 0 for >= outer."""
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    t = np.abs(np.asarray(coords, dtype=float) - center)
    rise = _smoothstep((outer - t) / (outer - inner))
    return rise


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """Smooth transition: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def s(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    num = s(x)
    return num / (num + s(1.0 - x))


def random_source(grid: GridSpec, rng: np.random.Generator,
                  complex_valued: bool = True,
                  cells: CellSet | None = None) -> GridFunction:
    """Random source supported in the admissible band (or a given cell set)."""
    mask = (cells or admissible_sources(grid)).mask
    vals = rng.standard_normal(grid.shape)
    if complex_valued:
        vals = vals + 1j * rng.standard_normal(grid.shape)
    return GridFunction(grid, np.where(mask, vals, 0.0))


def random_potential(grid: GridSpec, rng: np.random.Generator,
                     amplitude: float = 0.5) -> GridFunction:
    """Random real potential on all rows (the stencil only reads interior rows)."""
    return GridFunction(grid, amplitude * rng.standard_normal(grid.shape))


@dataclass
class Scenario:
    """A grid, a solved hyperbolic operator, a region K and a family A(lambda)."""

    grid: GridSpec
    op: DiffOp
    region: Region
    family: object
    extras: dict = field(default_factory=dict)

    @property
    def solver(self) -> CausalSolver:
        if "_solver" not in self.extras:
            self.extras["_solver"] = CausalSolver(self.op)
        return self.extras["_solver"]


def kg_grid(nt: int, nx: int, dx: float = 0.25, dt: float | None = None) -> GridSpec:
    """Klein-Gordon grid; dt defaults to dx/2, safely inside the leapfrog
    stability window for masses of order one."""
    if dt is None:
        dt = 0.5 * dx
    return GridSpec(nt, nx, dt, dx, Topology.TIME_BOUNDED_CIRCLE)


def centered_region(grid: GridSpec, t_extent: int, x_extent: int) -> Region:
    n0 = (grid.nt - t_extent) // 2
    j0 = (grid.nx - x_extent) // 2
    return Region.from_rect(grid, (n0, n0 + t_extent - 1), (j0, j0 + x_extent - 1))


def random_kernel_scenario(nt: int = 20, nx: int = 12, degree: int = 1,
                           seed: int = 0, amplitude: float = 0.3,
                           mass: float = 0.0,
                           support_nonincreasing: bool = False) -> Scenario:
    """Random dense kernel family of the given polynomial degree."""
    rng = np.random.default_rng(seed)
    grid = kg_grid(nt, nx)
    op = make_klein_gordon(grid, mass=mass)
    region = centered_region(grid, min(5, nt - 4), min(5, nx))
    size = region.size
    scale = amplitude / (size * grid.weight)
    coeffs = [scale * (rng.standard_normal((size, size))
                       + 1j * rng.standard_normal((size, size)))
              for _ in range(degree)]
    family = make_kernel_family(region, coeffs,
                                support_nonincreasing=support_nonincreasing)
    return Scenario(grid, op, region, family, {"rng": rng})


def rank_one_scenario(nt: int = 24, nx: int = 16, seed: int = 0,
                      mass: float = 0.0) -> Scenario:
    """A = -lambda f <h, .> with smooth K-supported profiles f and h.

    Exceptional points sit exactly at lambda = 1/nu+- with
    nu+- = <h, E+- f>; the scenario records the profiles for test use.
    """
    rng = np.random.default_rng(seed)
    grid = kg_grid(nt, nx)
    op = make_klein_gordon(grid, mass=mass)
    region = centered_region(grid, 7, min(9, nx))
    rows = sorted({c[0] for c in region.cell_list})
    cols = sorted({c[1] for c in region.cell_list})
    tprof = bump_profile(np.arange(grid.nt, dtype=float),
                         center=float(np.mean(rows)), halfwidth=len(rows) / 2 + 0.5)
    xprof = bump_profile(np.arange(grid.nx, dtype=float),
                         center=float(np.mean(cols)), halfwidth=len(cols) / 2 + 0.5)
    base = np.outer(tprof, xprof)
    base = np.where(region.cells.mask, base, 0.0)
    f = GridFunction(grid, base / np.abs(base).max())
    shift = np.outer(np.roll(tprof, 1), xprof)
    hvals = np.where(region.cells.mask, shift + 0.3 * base, 0.0)
    h = GridFunction(grid, hvals / np.abs(hvals).max())
    # normalize so nu+ = <h, E+ f> = 1/2, putting the retarded exceptional
    # point exactly at lambda = 2
    from .lattice import pairing

    nu_plus = pairing(h, CausalSolver(op).retarded(f))
    f = f * (0.5 / nu_plus)
    rank_one = make_rank_one(f, h, region)
    family = KernelFamily(region, (rank_one.matrix,))
    return Scenario(grid, op, region, family,
                    {"f": f, "h": h, "rng": rng})


def multiplication_scenario(nt: int = 20, nx: int = 12, seed: int = 0,
                            amplitude: float = 0.8, mass: float = 0.0) -> Scenario:
    """Degree-1 multiplication family: A(lambda) = lambda V(x)."""
    rng = np.random.default_rng(seed)
    grid = kg_grid(nt, nx)
    op = make_klein_gordon(grid, mass=mass)
    region = centered_region(grid, min(5, nt - 4), min(5, nx))
    vals = amplitude * rng.standard_normal(grid.shape)
    V = GridFunction(grid, np.where(region.cells.mask, vals, 0.0))
    mult = make_multiplication(V, region)
    family = KernelFamily(region, (mult.matrix,), support_nonincreasing=True)
    return Scenario(grid, op, region, family, {"V": V, "rng": rng})


def nihilo_scenario(n_cells: int = 33) -> Scenario:
    """Null-square scenario with a non-smoothing interaction.

    Window [-4,4]^2, K = [-2,2]^2.  The interaction (f d_u) (x) (-|g'><h|)
    annihilates every product upsilon (x) g with upsilon an impulse at a
    u-gridpoint of [-1,1], so the kernel of I+B+ grows linearly with the
    resolution.
    """
    if (n_cells - 1) % 8 != 0:
        raise ValueError("n_cells must be 8k+1 so the window [-4,4] is sampled evenly")
    spacing = 8.0 / (n_cells - 1)
    grid = GridSpec(n_cells, n_cells, spacing, spacing, Topology.NULL_SQUARE,
                    t0=-4.0, x0=-4.0)
    region = Region.from_window(grid, (-2.0, 2.0), (-2.0, 2.0))
    u = grid.times()
    v = grid.positions()
    f_u = plateau_profile(u, inner=1.5, outer=2.0)
    # g = cumulative sum of a bump on [-2, 2], so its backward difference is
    # exactly that bump on the lattice and supp g stays in [-2, infinity)
    gprime = bump_profile(v, center=0.0, halfwidth=2.0 - spacing)
    g_v = np.cumsum(gprime)
    h_v = bump_profile(v, center=0.0, halfwidth=1.5)
    op = make_null_wave(grid)
    A = make_nihilo_A(grid, f_u, g_v, h_v, region)
    family = NihiloFamily(A)
    kernel_u_indices = [i for i in range(grid.nt) if -1.0 - 1e-12 <= u[i] <= 1.0 + 1e-12]
    return Scenario(grid, op, region, family,
                    {"g_v": g_v, "h_v": h_v, "f_u": f_u,
                     "kernel_u_indices": kernel_u_indices})


def nihilo_kernel_vectors(scenario: Scenario) -> list[GridFunction]:
    """The exact lattice kernel solutions upsilon (x) g of (P + A)phi = 0."""
    grid = scenario.grid
    g_v = scenario.extras["g_v"]
    out = []
    for i in scenario.extras["kernel_u_indices"]:
        vals = np.zeros(grid.shape, dtype=complex)
        vals[i, :] = g_v
        out.append(GridFunction(grid, vals))
    return out
