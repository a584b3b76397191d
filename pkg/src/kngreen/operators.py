"""Linear operators on grid functions.

Contains the hyperbolic stencils (Klein-Gordon leapfrog and the null-wave
product stencil), nonlocal interaction operators represented by K x K kernel
matrices, polynomial families A(lambda) of such kernels, and bilinear duals.

Conventions
-----------
* A kernel operator with matrix ``a`` acts by ``(Af)(p) = sum_q a(p,q) f(q) w``
  with ``w`` the cell weight; its *value-basis* matrix ``w*a`` maps value
  vectors on K to value vectors on K, so that value-basis matrices compose as
  plain matrix products.
* Duals are bilinear transposes with respect to the uniform measure (no
  conjugation).  The Klein-Gordon stencil is matrix-symmetric on the interior
  block, hence self-dual; the null-wave stencil transposes to the forward
  difference product.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .lattice import (
    GridFunction,
    GridSpec,
    Region,
    Topology,
    support,
)


class LinearMap:
    """A linear self-map of grid functions."""

    grid: GridSpec

    def apply(self, f: GridFunction) -> GridFunction:
        raise NotImplementedError

    def __call__(self, f: GridFunction) -> GridFunction:
        if f.grid is not self.grid and f.grid != self.grid:
            raise ValueError("grid mismatch")
        return self.apply(f)


class StencilKind(Enum):
    KLEIN_GORDON = "klein_gordon"
    NULL_WAVE = "null_wave"


class DiffOp(LinearMap):
    """A hyperbolic stencil operator P.

    Klein-Gordon (on the time-bounded circle, defined on rows 1..nt-2):

        (Pu)(n,j) = (u(n+1,j) - 2u(n,j) + u(n-1,j))/dt^2
                  - (u(n,j+1) - 2u(n,j) + u(n,j-1))/dx^2
                  + (m^2 + V(n,j)) u(n,j)

    Null wave (on the null square, defined for i,j >= 1):

        (Pu)(i,j) = (u(i,j) - u(i-1,j) - u(i,j-1) + u(i-1,j-1))/(du*dv)

    ``transposed`` null-wave operators use the forward difference product,
    the bilinear transpose of the backward stencil.
    """

    def __init__(self, grid: GridSpec, kind: StencilKind, mass: float = 0.0,
                 potential: GridFunction | None = None, transposed: bool = False):
        self.grid = grid
        self.kind = kind
        self.mass = float(mass)
        self.potential = potential
        self.transposed = transposed
        if kind is StencilKind.KLEIN_GORDON:
            if grid.topology is not Topology.TIME_BOUNDED_CIRCLE:
                raise ValueError("Klein-Gordon stencil needs the time-bounded circle topology")
            if mass < 0:
                raise ValueError("mass must be nonnegative")
        else:
            if grid.topology is not Topology.NULL_SQUARE:
                raise ValueError("null-wave stencil needs the null-square topology")

    def apply(self, f: GridFunction) -> GridFunction:
        u = f.values
        g = self.grid
        out = np.zeros(g.shape, dtype=complex)
        if self.kind is StencilKind.KLEIN_GORDON:
            dt2, dx2 = g.dt ** 2, g.dx ** 2
            interior = slice(1, g.nt - 1)
            lap_x = (np.roll(u, -1, axis=1) - 2 * u + np.roll(u, 1, axis=1)) / dx2
            mass_term = self.mass ** 2 * u
            if self.potential is not None:
                mass_term = mass_term + self.potential.values * u
            out[interior] = ((u[2:] - 2 * u[1:-1] + u[:-2]) / dt2
                             - lap_x[interior] + mass_term[interior])
        else:
            w = g.dt * g.dx
            if not self.transposed:
                out[1:, 1:] = (u[1:, 1:] - u[:-1, 1:] - u[1:, :-1] + u[:-1, :-1]) / w
            else:
                out[:-1, :-1] = (u[:-1, :-1] - u[1:, :-1] - u[:-1, 1:] + u[1:, 1:]) / w
        return GridFunction(g, out)

    def dual(self) -> "DiffOp":
        """Bilinear transpose.  Klein-Gordon is self-dual (symmetric stencil,
        even for complex V); the null wave flips to the mirrored stencil."""
        if self.kind is StencilKind.KLEIN_GORDON:
            return self
        return DiffOp(self.grid, self.kind, transposed=not self.transposed)


def make_klein_gordon(grid: GridSpec, mass: float = 0.0,
                      potential: GridFunction | None = None) -> DiffOp:
    return DiffOp(grid, StencilKind.KLEIN_GORDON, mass=mass, potential=potential)


def make_null_wave(grid: GridSpec) -> DiffOp:
    return DiffOp(grid, StencilKind.NULL_WAVE)


class KernelOp(LinearMap):
    """An integral operator with kernel supported in K x K.

    ``(Af)(p) = sum_{q in K} a(p,q) f(q) w`` for p in K, zero outside K.
    Kills any f vanishing on K by construction.
    """

    def __init__(self, region: Region, matrix: np.ndarray,
                 support_nonincreasing: bool = False):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (region.size, region.size):
            raise ValueError(f"kernel matrix must be {region.size}x{region.size}, "
                             f"got {matrix.shape}")
        self.grid = region.grid
        self.region = region
        self.matrix = matrix
        self.support_nonincreasing = support_nonincreasing

    @property
    def value_matrix(self) -> np.ndarray:
        """Matrix acting on value vectors over K: w * kernel."""
        return self.grid.weight * self.matrix

    def apply(self, f: GridFunction) -> GridFunction:
        vals = self.region.extract(f)
        return self.region.embed(self.value_matrix @ vals)

    def dual(self) -> "KernelOp":
        return KernelOp(self.region, self.matrix.T.copy(),
                        support_nonincreasing=self.support_nonincreasing)


@dataclass(frozen=True)
class KernelFamily:
    """Polynomial family A(lambda) = sum_{k>=1} lambda^k rho_k of K x K kernels.

    No constant term, so A(0) = 0.
    """

    region: Region
    coefficients: tuple[np.ndarray, ...]
    support_nonincreasing: bool = False

    def __post_init__(self) -> None:
        if not self.coefficients:
            raise ValueError("kernel family needs at least one coefficient (degree >= 1)")
        size = self.region.size
        for k, rho in enumerate(self.coefficients, start=1):
            if rho.shape != (size, size):
                raise ValueError(f"coefficient {k} has shape {rho.shape}, expected "
                                 f"({size}, {size})")

    @property
    def degree(self) -> int:
        return len(self.coefficients)

    def evaluate(self, lam: complex) -> KernelOp:
        matrix = np.zeros((self.region.size, self.region.size), dtype=complex)
        power = 1.0 + 0.0j
        for rho in self.coefficients:
            power = power * lam
            matrix = matrix + power * rho
        return KernelOp(self.region, matrix,
                        support_nonincreasing=self.support_nonincreasing)

    def dual(self) -> "KernelFamily":
        return KernelFamily(self.region,
                            tuple(rho.T.copy() for rho in self.coefficients),
                            support_nonincreasing=self.support_nonincreasing)


def make_kernel_family(region: Region, coefficient_kernels: Sequence[np.ndarray],
                       support_nonincreasing: bool = False) -> KernelFamily:
    coeffs = tuple(np.asarray(rho, dtype=complex) for rho in coefficient_kernels)
    return KernelFamily(region, coeffs, support_nonincreasing=support_nonincreasing)


def eval_family(family: KernelFamily, lam: complex) -> KernelOp:
    return family.evaluate(lam)


def _require_region_support(f: GridFunction, region: Region, name: str) -> None:
    if not support(f).issubset(region.cells):
        raise ValueError(f"{name} must be supported in {region.label}")


def make_rank_one(f: GridFunction, h: GridFunction, region: Region) -> KernelOp:
    """(A phi)(p) = -f(p) <h, phi>_bilinear, kernel a(p,q) = -f(p) h(q)."""
    _require_region_support(f, region, "f")
    _require_region_support(h, region, "h")
    fk = region.extract(f)
    hk = region.extract(h)
    return KernelOp(region, -np.outer(fk, hk))


def make_multiplication(V: GridFunction, region: Region) -> KernelOp:
    """Multiplication by V: diagonal kernel a(p,p) = V(p)/w so (Af)(p) = V(p)f(p)."""
    _require_region_support(V, region, "V")
    vk = region.extract(V)
    return KernelOp(region, np.diag(vk / region.grid.weight),
                    support_nonincreasing=True)


class NihiloOp(LinearMap):
    """The null-square interaction (f d_u) (x) T with T = -|g'><h|.

    ``(A phi)(i,j) = -f(i) (Dg)(j) sum_{j'} h(j') (D_u phi)(i,j') dv`` with D
    the backward difference used by the null-wave stencil.  Its range lies in
    the region, but its input dependence reaches one backward cell beyond it,
    so it is kept distinct from KernelOp.
    """

    def __init__(self, grid: GridSpec, region: Region, f_u: np.ndarray,
                 dg_v: np.ndarray, h_v: np.ndarray, scale: complex = 1.0):
        if grid.topology is not Topology.NULL_SQUARE:
            raise ValueError("nihilo interaction lives on the null square")
        self.grid = grid
        self.region = region
        self.f_u = np.asarray(f_u, dtype=float)
        self.dg_v = np.asarray(dg_v, dtype=complex)
        self.h_v = np.asarray(h_v, dtype=complex)
        self.scale = complex(scale)
        self.support_nonincreasing = False
        for arr, name in ((self.f_u, "f_u"), (self.dg_v, "dg_v"), (self.h_v, "h_v")):
            if arr.shape != (grid.nt if name == "f_u" else grid.nx,):
                raise ValueError(f"{name} has the wrong length")

    def apply(self, phi: GridFunction) -> GridFunction:
        u = phi.values
        du, dv = self.grid.dt, self.grid.dx
        d_u = np.empty_like(u)
        d_u[0] = u[0] / du
        d_u[1:] = (u[1:] - u[:-1]) / du
        moments = d_u @ self.h_v * dv          # per-row pairing with h
        out = -self.scale * np.outer(self.f_u * moments, self.dg_v)
        return GridFunction(self.grid, out)


@dataclass(frozen=True)
class NihiloFamily:
    """Degree-one family lambda * A_nihilo."""

    op: NihiloOp

    @property
    def region(self) -> Region:
        return self.op.region

    @property
    def support_nonincreasing(self) -> bool:
        return False

    @property
    def degree(self) -> int:
        return 1

    def evaluate(self, lam: complex) -> NihiloOp:
        return NihiloOp(self.op.grid, self.op.region, self.op.f_u, self.op.dg_v,
                        self.op.h_v, scale=lam * self.op.scale)


def make_nihilo_A(grid: GridSpec, f_u: np.ndarray, g_v: np.ndarray,
                  h_v: np.ndarray, region: Region) -> NihiloOp:
    """Build the nihilo interaction from 1D profiles sampled on the grid axes.

    Normalizes <h, g> = sum h*g*dv to one; the backward difference of g must be
    supported inside the region's v-window and f must equal one wherever the
    kernel construction needs it (checked by the caller's scenario recipe).
    """
    g_v = np.asarray(g_v, dtype=complex)
    h_v = np.asarray(h_v, dtype=complex)
    norm = complex(np.sum(h_v * g_v) * grid.dx)
    if abs(norm) < 1e-14:
        raise ValueError("cannot normalize: <h, g> is zero")
    dg = np.empty_like(g_v)
    dg[0] = g_v[0] / grid.dx
    dg[1:] = (g_v[1:] - g_v[:-1]) / grid.dx
    return NihiloOp(grid, region, np.asarray(f_u, dtype=float), dg, h_v / norm)


def dual(op):
    """Bilinear transpose with respect to the uniform measure."""
    if isinstance(op, (DiffOp, KernelOp, KernelFamily)):
        return op.dual()
    raise TypeError(f"unsupported operator kind: {type(op).__name__}")
