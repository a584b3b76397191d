"""Classical Moller maps relating free and interacting field dynamics.

For non-exceptional lambda the map

    r_lambda phi = phi - E+- (I + A(lambda)E+-)^{-1} A(lambda) phi

carries solutions of P phi = 0 to solutions of (P + A(lambda)) phi = 0 and is
inverted by r_lambda^{-1} phi = phi + E+- A(lambda) phi.  Both differ from the
identity only on the causal cone of K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GridFunction, admissible_sources, causal_set, support
from .green import CausalSolver
from .fredholm import modified_green, resolve_sources, k_block, KBlock
from .report import VerifyReport


_SIGN = {"retarded": "+", "advanced": "-"}


@dataclass
class MollerMap:
    """A fixed-lambda Moller operator handle."""

    direction: str
    lam: complex
    solver: CausalSolver
    family: object

    def __post_init__(self) -> None:
        if self.direction not in _SIGN:
            raise ValueError("direction must be 'retarded' or 'advanced'")
        self._block: KBlock | None = None

    @property
    def sign(self) -> str:
        return _SIGN[self.direction]

    def _kblock(self) -> KBlock:
        if self._block is None:
            self._block = k_block(self.solver, self.family, self.lam, self.sign)
        return self._block


def moller(mmap: MollerMap, phi: GridFunction) -> GridFunction:
    """r_lambda phi; differs from phi only on the causal cone of K."""
    A = mmap.family.evaluate(mmap.lam)
    src = A(phi)
    if src.norm_inf() == 0.0:
        return phi.copy()
    g = resolve_sources(mmap.solver, mmap.family, mmap.lam, mmap.sign, src,
                        block=mmap._kblock())
    return phi - mmap.solver.green(g, mmap.sign)


def moller_inverse(mmap: MollerMap, phi: GridFunction) -> GridFunction:
    """r_lambda^{-1} phi = phi + E+- A(lambda) phi."""
    A = mmap.family.evaluate(mmap.lam)
    src = A(phi)
    if src.norm_inf() == 0.0:
        return phi.copy()
    return phi + mmap.solver.green(src, mmap.sign)


def _interior_residual(op_value: GridFunction) -> float:
    """Sup norm over rows where the stencil is defined."""
    v = op_value.values
    grid = op_value.grid
    from .lattice import Topology

    if grid.topology is Topology.TIME_BOUNDED_CIRCLE:
        core = v[1:grid.nt - 1]
    else:
        core = v[1:, 1:]
    return float(np.abs(core).max()) if core.size else 0.0


def verify_intertwining(mmap: MollerMap, f: GridFunction) -> VerifyReport:
    """Check r maps P-solutions to (P+A)-solutions and r^{-1} the reverse.

    phi0 = Ef is a homogeneous P-solution; phi_lam = (E~- - E~+)f an
    interacting one.  Residuals are taken on interior rows only, since the
    finite grid cannot represent the stencil on its boundary rows.
    """
    if not support(f).issubset(admissible_sources(f.grid)):
        raise ValueError("verification source must be admissible")
    report = VerifyReport(f"moller-intertwining-{mmap.direction}")
    solver, family, lam = mmap.solver, mmap.family, mmap.lam
    P = solver.op
    A = family.evaluate(lam)

    phi0 = solver.causal_propagator(f)
    r_phi0 = moller(mmap, phi0)
    scale0 = max(phi0.norm_inf(), 1e-300)
    res0 = _interior_residual(P(r_phi0) + A(r_phi0)) / scale0
    report.record("free-to-interacting residual", res0, 1e-9)

    phi_lam = (modified_green(solver, family, lam, "-", f)
               - modified_green(solver, family, lam, "+", f))
    back = moller_inverse(mmap, phi_lam)
    scale1 = max(phi_lam.norm_inf(), 1e-300)
    res1 = _interior_residual(P(back)) / scale1
    report.record("interacting-to-free residual", res1, 1e-9)

    diff = support(r_phi0 - phi0)
    cone = causal_set(f.grid, family.region.cells,
                      "future" if mmap.sign == "+" else "past")
    report.require("difference confined to cone of K", diff.issubset(cone))
    return report
