"""Discrete 1+1D spacetimes, causal structure, regions and grid functions.

Two lattice geometries are supported:

* ``TIME_BOUNDED_CIRCLE`` -- ``nt`` time rows on a periodic spatial circle of
  ``nx`` cells.  The causal cone travels at one spatial cell per time step and
  wraps around the circle.
* ``NULL_SQUARE`` -- an ``nt`` x ``nx`` square in null coordinates (u, v);
  the causal future of a point is the coordinate quadrant with both indices
  nondecreasing.

The cell measure is the uniform weight ``dt*dx`` (``du*dv`` on the null
square); all bilinear pairings carry this weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Tuple

import numpy as np

Cell = Tuple[int, int]


class Topology(Enum):
    TIME_BOUNDED_CIRCLE = "time_bounded_circle"
    NULL_SQUARE = "null_square"


@dataclass(frozen=True)
class GridSpec:
    """Shape, spacing and geometry of a lattice spacetime."""

    nt: int
    nx: int
    dt: float
    dx: float
    topology: Topology = Topology.TIME_BOUNDED_CIRCLE
    t0: float = 0.0
    x0: float = 0.0

    def __post_init__(self) -> None:
        if self.nt < 6:
            raise ValueError(f"nt must be >= 6 (two-row margins at each end), got {self.nt}")
        if self.nx < 4:
            raise ValueError(f"nx must be >= 4, got {self.nx}")
        if self.dt <= 0 or self.dx <= 0:
            raise ValueError("spacings must be positive")
        if self.dt > self.dx * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} violates dt <= dx (unit-speed causal cone)")
        if self.topology is Topology.NULL_SQUARE and abs(self.dt - self.dx) > 1e-12 * self.dx:
            raise ValueError("null-square grids require du == dv")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nt, self.nx)

    @property
    def ncells(self) -> int:
        return self.nt * self.nx

    @property
    def weight(self) -> float:
        """Uniform cell measure dt*dx (du*dv on the null square)."""
        return self.dt * self.dx

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    def positions(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    def check_cell(self, cell: Cell) -> None:
        n, j = cell
        if not (0 <= n < self.nt and 0 <= j < self.nx):
            raise ValueError(f"cell {cell} outside {self.shape} grid")


class CellSet:
    """A subset of grid cells with bitset semantics."""

    __slots__ = ("grid", "_mask")

    def __init__(self, grid: GridSpec, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ValueError(f"mask shape {mask.shape} != grid shape {grid.shape}")
        self.grid = grid
        self._mask = mask

    @classmethod
    def empty(cls, grid: GridSpec) -> "CellSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: GridSpec) -> "CellSet":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def from_cells(cls, grid: GridSpec, cells: Iterable[Cell]) -> "CellSet":
        mask = np.zeros(grid.shape, dtype=bool)
        for cell in cells:
            grid.check_cell(cell)
            mask[cell] = True
        return cls(grid, mask)

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    def __contains__(self, cell: Cell) -> bool:
        n, j = cell
        return 0 <= n < self.grid.nt and 0 <= j < self.grid.nx and bool(self._mask[n, j])

    def __iter__(self) -> Iterator[Cell]:
        for n, j in zip(*np.nonzero(self._mask)):
            yield (int(n), int(j))

    def __len__(self) -> int:
        return int(self._mask.sum())

    def __bool__(self) -> bool:
        return bool(self._mask.any())

    def __or__(self, other: "CellSet") -> "CellSet":
        return CellSet(self.grid, self._mask | other._mask)

    def __and__(self, other: "CellSet") -> "CellSet":
        return CellSet(self.grid, self._mask & other._mask)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CellSet) and bool(np.array_equal(self._mask, other._mask))

    def __hash__(self):
        return hash(self._mask.tobytes())

    def issubset(self, other: "CellSet") -> bool:
        return bool(np.all(~self._mask | other._mask))

    def cells(self) -> list[Cell]:
        """Cells in row-major order (the canonical cell ordering)."""
        return list(self)


@dataclass(frozen=True)
class Region:
    """A nonempty cell region K kept clear of the temporal margins."""

    grid: GridSpec
    cells: CellSet
    label: str = "K"

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("region must be nonempty")
        rows = np.nonzero(self.cells.mask.any(axis=1))[0]
        if rows.min() < 2 or rows.max() > self.grid.nt - 3:
            raise ValueError(
                f"region rows [{rows.min()}, {rows.max()}] violate the margin 2 <= n <= nt-3"
            )
        if self.grid.topology is Topology.NULL_SQUARE:
            # both null directions play the role of time on the null square
            cols = np.nonzero(self.cells.mask.any(axis=0))[0]
            if cols.min() < 2 or cols.max() > self.grid.nx - 3:
                raise ValueError("null-square region needs margins in both null directions")
        object.__setattr__(self, "_cell_list", tuple(self.cells))
        index = {cell: k for k, cell in enumerate(self._cell_list)}
        object.__setattr__(self, "_index", index)

    @property
    def cell_list(self) -> tuple[Cell, ...]:
        return self._cell_list  # type: ignore[attr-defined]

    @property
    def size(self) -> int:
        return len(self.cell_list)

    def index_of(self, cell: Cell) -> int:
        return self._index[cell]  # type: ignore[attr-defined]

    def extract(self, f: "GridFunction") -> np.ndarray:
        """Values of f on K in the canonical cell ordering."""
        return f.values[self.cells.mask]

    def embed(self, vec: np.ndarray) -> "GridFunction":
        """Grid function equal to vec on K and zero elsewhere."""
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (self.size,):
            raise ValueError(f"expected vector of length {self.size}, got {vec.shape}")
        values = np.zeros(self.grid.shape, dtype=complex)
        values[self.cells.mask] = vec
        return GridFunction(self.grid, values)

    @classmethod
    def from_rect(cls, grid: GridSpec, rows: tuple[int, int], cols: tuple[int, int],
                  label: str = "K") -> "Region":
        mask = np.zeros(grid.shape, dtype=bool)
        mask[rows[0]:rows[1] + 1, cols[0]:cols[1] + 1] = True
        return cls(grid, CellSet(grid, mask), label)

    @classmethod
    def from_window(cls, grid: GridSpec, t_window: tuple[float, float],
                    x_window: tuple[float, float], label: str = "K") -> "Region":
        """Region from coordinate windows [t0,t1] x [x0,x1] (inclusive)."""
        ts = grid.times()
        xs = grid.positions()
        tol = 1e-9 * max(grid.dt, grid.dx)
        tmask = (ts >= t_window[0] - tol) & (ts <= t_window[1] + tol)
        xmask = (xs >= x_window[0] - tol) & (xs <= x_window[1] + tol)
        mask = tmask[:, None] & xmask[None, :]
        return cls(grid, CellSet(grid, mask), label)


class GridFunction:
    """A complex-valued lattice field."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: GridSpec) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def impulse(cls, grid: GridSpec, cell: Cell, value: complex = 1.0) -> "GridFunction":
        grid.check_cell(cell)
        values = np.zeros(grid.shape, dtype=complex)
        values[cell] = value
        return cls(grid, values)

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "GridFunction":
        return GridFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def norm_inf(self) -> float:
        return float(np.abs(self.values).max())

    def masked(self, cells: CellSet) -> "GridFunction":
        """Restriction to a cell set, extended by zero."""
        return GridFunction(self.grid, np.where(cells.mask, self.values, 0.0))

    def time_reversed(self) -> "GridFunction":
        return GridFunction(self.grid, self.values[::-1, :].copy())


def pairing(f: GridFunction, g: GridFunction) -> complex:
    """Bilinear pairing <f, g> = sum f*g*weight (no conjugation)."""
    return complex(np.sum(f.values * g.values) * f.grid.weight)


def inner(f: GridFunction, g: GridFunction) -> complex:
    """Sesquilinear inner product, conjugate in the first slot."""
    return complex(np.sum(np.conj(f.values) * g.values) * f.grid.weight)


def causal_set(grid: GridSpec, seed: CellSet, direction: str) -> CellSet:
    """Causal future/past of a cell set.

    On the circle topology the cone grows by one cell per time step and wraps;
    on the null square it is the union of coordinate quadrants.  Always
    contains the seed and is monotone and idempotent.
    """
    if direction not in ("future", "past"):
        raise ValueError(f"direction must be 'future' or 'past', got {direction!r}")
    mask = seed.mask
    if grid.topology is Topology.NULL_SQUARE:
        work = mask if direction == "future" else mask[::-1, ::-1]
        reach = np.maximum.accumulate(np.maximum.accumulate(work, axis=0), axis=1)
        if direction == "past":
            reach = reach[::-1, ::-1]
        return CellSet(grid, reach)
    reach = mask.copy()
    if direction == "future":
        rows = range(1, grid.nt)
        prev_offset = -1
    else:
        rows = range(grid.nt - 2, -1, -1)
        prev_offset = 1
    for n in rows:
        prev = reach[n + prev_offset]
        reach[n] |= prev | np.roll(prev, 1) | np.roll(prev, -1)
    return CellSet(grid, reach)


def support(f: GridFunction, tol: float = 1e-12) -> CellSet:
    """Cells where |f| exceeds tol * max(1, max|f|)."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    absf = np.abs(f.values)
    threshold = tol * max(1.0, float(absf.max()))
    return CellSet(f.grid, absf > threshold)


def admissible_sources(grid: GridSpec) -> CellSet:
    """Cells clear of the two-row temporal margins: 2 <= n <= nt-3.

    On the null square both coordinates are null-time directions, so the
    margin applies in both.
    """
    mask = np.zeros(grid.shape, dtype=bool)
    mask[2:grid.nt - 2, :] = True
    if grid.topology is Topology.NULL_SQUARE:
        mask[:, :2] = False
        mask[:, grid.nx - 2:] = False
    return CellSet(grid, mask)
