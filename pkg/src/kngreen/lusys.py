"""Block LU factorization for coupled systems of K-nonlocal operators.

An n x n system has hyperbolic diagonal blocks P_i + A_i(lambda) and
off-diagonal couplings given by K x K kernel operators.  Eliminating the
leading block with its modified Green operator leaves a Schur complement
whose interactions are again exact K x K kernels:

    A_hat_ij = A_ij - S_i1 * G1~ * R_1j,   G1~ = G1 (I + B1)^{-1}

with G1 the value-basis K-block of E1+- and B1 the K-block of A_1 E1+-.
The recursion bottoms out at n = 1, and the block triangular solve yields
the system Green operators.

Everything is evaluated at one fixed lambda: Schur interactions are rational
in lambda, so they are stored as matrices, not polynomial families.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import GridFunction, Region, admissible_sources, causal_set, support
from .operators import KernelOp
from .green import CausalSolver
from .fredholm import NearSingularError, DEFAULT_TAU_SING
from .report import VerifyReport


@dataclass(frozen=True)
class _FixedKernel:
    """A constant (lambda-independent) stand-in for a kernel family."""

    op: KernelOp

    @property
    def region(self) -> Region:
        return self.op.region

    @property
    def support_nonincreasing(self) -> bool:
        return self.op.support_nonincreasing

    @property
    def degree(self) -> int:
        return 1

    def evaluate(self, lam: complex) -> KernelOp:
        return self.op


class BlockSystem:
    """An n x n coupled system over one grid and one region K.

    diag[i] is (DiffOp, family); offdiag[(i, j)] is a kernel family for the
    coupling from component j into equation i.
    """

    def __init__(self, diag: list, offdiag: dict, region: Region, lam: complex):
        if not diag:
            raise ValueError("system needs at least one diagonal block")
        self.diag = list(diag)
        self.offdiag = dict(offdiag)
        self.region = region
        self.lam = complex(lam)
        self.n = len(self.diag)
        grid = region.grid
        for P, fam in self.diag:
            if P.grid != grid or fam.region is not region:
                raise ValueError("all blocks must share one grid and one region")
        for (i, j), fam in self.offdiag.items():
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"bad off-diagonal index {(i, j)}")
            if fam.region is not region:
                raise ValueError("off-diagonal couplings must use the shared region")
        self.solvers = [CausalSolver(P) for P, _ in self.diag]

    def coupling(self, i: int, j: int) -> KernelOp | None:
        fam = self.offdiag.get((i, j))
        return None if fam is None else fam.evaluate(self.lam)

    def apply(self, F: list[GridFunction]) -> list[GridFunction]:
        """The full block operator acting on a block grid function."""
        if len(F) != self.n:
            raise ValueError(f"expected {self.n} components, got {len(F)}")
        out = []
        for i in range(self.n):
            P, fam = self.diag[i]
            acc = P(F[i]) + fam.evaluate(self.lam)(F[i])
            for j in range(self.n):
                if j == i:
                    continue
                C = self.coupling(i, j)
                if C is not None:
                    acc = acc + C(F[j])
            out.append(acc)
        return out


@dataclass
class FactoredSystem:
    """One elimination stage: leading modified Green data + factored remainder."""

    sign: str
    lam: complex
    region: Region
    solver: CausalSolver
    family: object
    inv_block: np.ndarray                      # (I + B1)^{-1}
    green_block: np.ndarray                    # G1, value-basis K-block of E1
    row_couplings: list[KernelOp | None]       # R_1j, j = 1..n-1
    col_couplings: list[KernelOp | None]       # S_i1, i = 1..n-1
    rest: "FactoredSystem | None"

    @property
    def depth(self) -> int:
        return 1 + (self.rest.depth if self.rest is not None else 0)

    def leading_green(self, f: GridFunction) -> GridFunction:
        """E~1+- f via the stored K-block inverse."""
        A = self.family.evaluate(self.lam)
        g1 = A(self.solver.green(f, self.sign))
        y = self.region.extract(g1)
        z = self.inv_block @ y
        g = f - g1 + self.region.embed(A.value_matrix @ self.green_block @ z)
        return self.solver.green(g, self.sign)


def _stage_blocks(solver: CausalSolver, family, lam: complex, sign: str,
                  tau_sing: float, stage: int):
    region = family.region
    G = solver.region_green_block(region, sign)
    B = family.evaluate(lam).value_matrix @ G
    M = np.eye(region.size) + B
    svals = np.linalg.svd(M, compute_uv=False)
    if svals[-1] <= tau_sing * max(float(svals[0]), 1.0):
        raise NearSingularError(float(svals[-1]), lam, stage)
    return G, np.linalg.inv(M)


def lu_factor(system: BlockSystem, sign: str,
              tau_sing: float = DEFAULT_TAU_SING, _stage: int = 1) -> FactoredSystem:
    """Eliminate the leading block, Schur-complement the rest, recurse."""
    region = system.region
    lam = system.lam
    solver = system.solvers[0]
    P1, fam1 = system.diag[0]
    G, inv_block = _stage_blocks(solver, fam1, lam, sign, tau_sing, _stage)
    # value-basis K-block of E~1+-: G (I + B1)^{-1}
    green_tilde = G @ inv_block

    n = system.n
    rows = [system.coupling(0, j) for j in range(1, n)]
    cols = [system.coupling(i, 0) for i in range(1, n)]
    rest = None
    if n > 1:
        w = region.grid.weight
        new_offdiag = {}
        new_diag = []
        for i in range(1, n):
            Pi, fam_i = system.diag[i]
            Si = cols[i - 1]
            for j in range(1, n):
                Rj = rows[j - 1]
                base = system.offdiag.get((i, j)) if i != j else None
                correction = None
                if Si is not None and Rj is not None:
                    vm = -(Si.value_matrix @ green_tilde @ Rj.value_matrix)
                    correction = KernelOp(region, vm / w)
                if i == j:
                    if correction is None:
                        new_diag.append((Pi, fam_i))
                    else:
                        diag_vm = fam_i.evaluate(lam).value_matrix + correction.value_matrix
                        merged = KernelOp(region, diag_vm / w)
                        new_diag.append((Pi, _FixedKernel(merged)))
                else:
                    vm = np.zeros((region.size, region.size), dtype=complex)
                    if base is not None:
                        vm = vm + base.evaluate(lam).value_matrix
                    if correction is not None:
                        vm = vm + correction.value_matrix
                    if np.any(vm != 0):
                        new_offdiag[(i - 1, j - 1)] = _FixedKernel(KernelOp(region, vm / w))
        schur = BlockSystem(new_diag, new_offdiag, region, lam)
        rest = lu_factor(schur, sign, tau_sing, _stage + 1)
    return FactoredSystem(sign, lam, region, solver, fam1, inv_block, G,
                          rows, cols, rest)


def system_green(factored: FactoredSystem, F: list[GridFunction]) -> list[GridFunction]:
    """Apply the block Green operator E_sys+- to a block source.

    Forward-eliminates the leading component, solves the factored Schur
    remainder, then back-substitutes through the row couplings.
    """
    if len(F) != factored.depth:
        raise ValueError(f"expected {factored.depth} components, got {len(F)}")
    if factored.rest is None:
        return [factored.leading_green(F[0])]
    phi1_free = factored.leading_green(F[0])
    reduced = []
    for i, f in enumerate(F[1:]):
        Si = factored.col_couplings[i]
        reduced.append(f if Si is None else f - Si(phi1_free))
    phi_rest = system_green(factored.rest, reduced)
    q = F[0]
    for j, phi in enumerate(phi_rest):
        Rj = factored.row_couplings[j]
        if Rj is not None:
            q = q - Rj(phi)
    phi1 = factored.leading_green(q)
    return [phi1] + phi_rest


def verify_system(system: BlockSystem, sign: str, trials: int = 10,
                  rng: np.random.Generator | None = None,
                  tau_sing: float = DEFAULT_TAU_SING) -> VerifyReport:
    """Two-sided inverse identities and block cone containment on random sources."""
    report = VerifyReport(f"block-system-{sign}")
    factored = lu_factor(system, sign, tau_sing)
    if rng is None:
        rng = np.random.default_rng(0)
    grid = system.region.grid
    adm = admissible_sources(grid).mask
    direction = "future" if sign == "+" else "past"
    max_fwd = 0.0
    max_bwd = 0.0
    contained = True
    for _ in range(trials):
        F = []
        for _i in range(system.n):
            vals = np.where(adm, rng.standard_normal(grid.shape)
                            + 1j * rng.standard_normal(grid.shape), 0.0)
            F.append(GridFunction(grid, vals))
        scale = max(max(f.norm_inf() for f in F), 1e-300)
        Phi = system_green(factored, F)
        resid_fwd = system.apply(Phi)
        for i in range(system.n):
            max_fwd = max(max_fwd, (resid_fwd[i] - F[i]).norm_inf() / scale)
        back = system_green(factored, system.apply(F))
        for i in range(system.n):
            max_bwd = max(max_bwd, (back[i] - F[i]).norm_inf() / scale)
        seed = support(F[0])
        for f in F[1:]:
            seed = seed | support(f)
        cone = causal_set(grid, seed | system.region.cells, direction)
        for phi in Phi:
            if not support(phi).issubset(cone):
                contained = False
    report.record("max forward residual", max_fwd, 1e-9)
    report.record("max backward residual", max_bwd, 1e-9)
    report.require("block cone containment", contained)
    return report
