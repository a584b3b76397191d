"""Exact retarded and advanced Green operators via causal marches.

The retarded solver starts from two zero initial rows and marches the leapfrog
recursion forward; the advanced solver is its time mirror.  On the null square
the solves are cumulative quadrant sums.  Both are exact two-sided inverses of
the stencil on its defining rows, and causal-cone containment holds with exact
zeros outside the cone.

Sources may occupy any defining row (1 <= n <= nt-2 for Klein-Gordon,
i,j >= 1 on the null square); rows the march cannot source raise an error.
Scenario sources and interaction regions are kept in the stricter admissible
band 2 <= n <= nt-3 so that compositions with kernel operators are well posed.
"""

from __future__ import annotations

import numpy as np

from .lattice import (
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
from .operators import DiffOp, StencilKind
from .report import VerifyReport

DENSE_CELL_CAP = 4096


class DenseCapError(RuntimeError):
    """Grid too large for a dense verification assembly."""


def _check_source_rows(op: DiffOp, f: GridFunction) -> None:
    v = f.values
    if op.kind is StencilKind.KLEIN_GORDON:
        if np.any(v[0] != 0) or np.any(v[-1] != 0):
            raise ValueError("source must vanish on the first and last time rows")
    elif not op.transposed:
        if np.any(v[0] != 0) or np.any(v[:, 0] != 0):
            raise ValueError("null-square source must vanish for i=0 or j=0")
    else:
        if np.any(v[-1] != 0) or np.any(v[:, -1] != 0):
            raise ValueError("transposed null-square source must vanish on the last row/column")


class CausalSolver:
    """Retarded/advanced Green operators E+- for a hyperbolic stencil."""

    def __init__(self, op: DiffOp):
        self.op = op
        self.grid = op.grid
        self._kblock_cache: dict = {}

    # -- marches ---------------------------------------------------------

    def retarded(self, f: GridFunction) -> GridFunction:
        _check_source_rows(self.op, f)
        if self.op.kind is StencilKind.KLEIN_GORDON:
            return self._march_kg(f, forward=True)
        return self._quadrant_sum(f, sign=+1)

    def advanced(self, f: GridFunction) -> GridFunction:
        _check_source_rows(self.op, f)
        if self.op.kind is StencilKind.KLEIN_GORDON:
            return self._march_kg(f, forward=False)
        return self._quadrant_sum(f, sign=-1)

    def green(self, f: GridFunction, sign: str) -> GridFunction:
        if sign == "+":
            return self.retarded(f)
        if sign == "-":
            return self.advanced(f)
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")

    def causal_propagator(self, f: GridFunction) -> GridFunction:
        """E = E- - E+; maps sources to homogeneous solutions."""
        return self.advanced(f) - self.retarded(f)

    def _march_kg(self, f: GridFunction, forward: bool) -> GridFunction:
        g = self.grid
        dt2, dx2 = g.dt ** 2, g.dx ** 2
        m2 = self.op.mass ** 2
        V = self.op.potential.values if self.op.potential is not None else None
        src = f.values
        u = np.zeros(g.shape, dtype=complex)
        rows = range(1, g.nt - 1) if forward else range(g.nt - 2, 0, -1)
        out_offset = 1 if forward else -1
        for n in rows:
            un = u[n]
            lap = (np.roll(un, -1) - 2 * un + np.roll(un, 1)) / dx2
            react = m2 * un if V is None else (m2 + V[n]) * un
            u[n + out_offset] = (2 * un - u[n - out_offset]
                                 + dt2 * (lap - react + src[n]))
        return GridFunction(g, u)

    def _quadrant_sum(self, f: GridFunction, sign: int) -> GridFunction:
        w = self.grid.weight
        src = f.values
        if not self.op.transposed:
            if sign > 0:
                u = w * np.cumsum(np.cumsum(src, axis=0), axis=1)
            else:
                # strictly-future quadrant: u(i,j) = w * sum_{i'>i, j'>j} f
                rev = src[::-1, ::-1]
                acc = np.cumsum(np.cumsum(rev, axis=0), axis=1)[::-1, ::-1]
                u = np.zeros_like(src)
                u[:-1, :-1] = w * acc[1:, 1:]
        else:
            if sign > 0:
                # dual retarded: strictly-past quadrant sum
                acc = np.cumsum(np.cumsum(src, axis=0), axis=1)
                u = np.zeros_like(src)
                u[1:, 1:] = w * acc[:-1, :-1]
            else:
                rev = src[::-1, ::-1]
                acc = np.cumsum(np.cumsum(rev, axis=0), axis=1)[::-1, ::-1]
                u = w * acc
                u[0, :] = 0.0
                u[:, 0] = 0.0
        return GridFunction(self.grid, u)

    # -- structure -------------------------------------------------------

    def region_green_block(self, region: Region, sign: str) -> np.ndarray:
        """Value-basis K x K block of E+-: G[p,q] = (E+- e_q)(p) for p,q in K.

        One causal march per K cell; cached per (region, sign).
        """
        key = (id(region), sign)
        cached = self._kblock_cache.get(key)
        if cached is not None:
            return cached
        size = region.size
        G = np.empty((size, size), dtype=complex)
        for q, cell in enumerate(region.cell_list):
            col = self.green(GridFunction.impulse(self.grid, cell), sign)
            G[:, q] = region.extract(col)
        self._kblock_cache[key] = G
        return G

    def symplectic_form(self, f1: GridFunction, f2: GridFunction) -> complex:
        """sigma(Ef1, Ef2) = <f1, E f2> (bilinear, measure-weighted)."""
        if self.op.kind is not StencilKind.KLEIN_GORDON:
            raise ValueError("symplectic form requires a formally self-adjoint stencil "
                             "(Klein-Gordon); the null-wave stencil is not self-dual")
        return pairing(f1, self.causal_propagator(f2))


def assembly_cells(grid: GridSpec) -> list:
    """Cells used for dense verification assemblies: the margin-free block.

    Transpose identities hold exactly on this block; boundary rows have no
    transpose counterpart on a finite grid.
    """
    adm = admissible_sources(grid).mask.copy()
    if grid.topology is Topology.NULL_SQUARE:
        adm[:, :2] = False
        adm[:, grid.nx - 2:] = False
    return [(int(n), int(j)) for n, j in zip(*np.nonzero(adm))]


def assemble_green_matrix(solver: CausalSolver, sign: str,
                          cells: list | None = None,
                          max_cells: int = DENSE_CELL_CAP) -> np.ndarray:
    """Dense E+- on the margin-free block (verification only)."""
    if solver.grid.ncells > max_cells:
        raise DenseCapError(f"grid has {solver.grid.ncells} cells, cap is {max_cells}")
    if cells is None:
        cells = assembly_cells(solver.grid)
    rows = tuple(np.array([c[k] for c in cells]) for k in (0, 1))
    n = len(cells)
    E = np.zeros((n, n), dtype=complex)
    for q, cell in enumerate(cells):
        col = solver.green(GridFunction.impulse(solver.grid, cell), sign)
        E[:, q] = col.values[rows]
    return E


def assemble_operator_matrix(op, cells: list, max_cells: int = DENSE_CELL_CAP) -> np.ndarray:
    """Dense matrix of any linear map on the given cells (verification only)."""
    if op.grid.ncells > max_cells:
        raise DenseCapError(f"grid has {op.grid.ncells} cells, cap is {max_cells}")
    rows = tuple(np.array([c[k] for c in cells]) for k in (0, 1))
    n = len(cells)
    M = np.zeros((n, n), dtype=complex)
    for q, cell in enumerate(cells):
        col = op(GridFunction.impulse(op.grid, cell))
        M[:, q] = col.values[rows]
    return M


def verify_duality(solver: CausalSolver, max_cells: int = DENSE_CELL_CAP) -> VerifyReport:
    """Check that the dual operator's Green matrices are the transposes E_t+- = (E-+)^T."""
    report = VerifyReport("green-duality")
    dual_solver = CausalSolver(solver.op.dual())
    cells = assembly_cells(solver.grid)
    for sign, anti in (("+", "-"), ("-", "+")):
        Et = assemble_green_matrix(dual_solver, sign, cells, max_cells)
        E = assemble_green_matrix(solver, anti, cells, max_cells)
        scale = max(1.0, float(np.abs(E).max()))
        report.record(f"max|E_t{sign} - (E{anti})^T|/scale",
                      float(np.abs(Et - E.T).max()) / scale, 1e-12)
    return report


def cone_containment(f: GridFunction, u: GridFunction, direction: str,
                     extra: CellSet | None = None, tol: float = 1e-12) -> bool:
    """support(u) subset of J^dir(supp f [union extra])."""
    seed = support(f, tol)
    if extra is not None:
        seed = seed | extra
    cone = causal_set(f.grid, seed, direction)
    return support(u, tol).issubset(cone)
