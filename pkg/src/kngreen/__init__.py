"""Modified Green operators for nonlocal perturbations on lattice spacetimes.

Exact retarded/advanced Green operators for hyperbolic stencils, Fredholm
inversion of I + A(lambda)E+-, exceptional-set scanning, Moller maps, index
duality and block LU factorization of coupled systems.
"""

from .lattice import (
    CellSet,
    GridFunction,
    GridSpec,
    Region,
    Topology,
    admissible_sources,
    causal_set,
    inner,
    pairing,
    support,
)
from .operators import (
    DiffOp,
    KernelFamily,
    KernelOp,
    NihiloFamily,
    NihiloOp,
    StencilKind,
    dual,
    eval_family,
    make_kernel_family,
    make_klein_gordon,
    make_multiplication,
    make_nihilo_A,
    make_null_wave,
    make_rank_one,
)
from .green import (
    CausalSolver,
    DenseCapError,
    assemble_green_matrix,
    assemble_operator_matrix,
    assembly_cells,
    cone_containment,
    verify_duality,
)
from .fredholm import (
    BornSeries,
    ExceptionalPoint,
    KBlock,
    KernelInfo,
    NearSingularError,
    ScanReport,
    born_series,
    dense_oracle,
    k_block,
    kernel_dim,
    modified_green,
    resolve_sources,
    scan_exceptional,
    verify_index_duality,
)
from .moller import MollerMap, moller, moller_inverse, verify_intertwining
from .lusys import BlockSystem, FactoredSystem, lu_factor, system_green, verify_system
from .report import VerifyReport

__all__ = [
    "BlockSystem", "BornSeries", "CausalSolver", "CellSet", "DenseCapError",
    "DiffOp", "ExceptionalPoint", "FactoredSystem", "GridFunction", "GridSpec",
    "KBlock", "KernelFamily", "KernelInfo", "KernelOp", "MollerMap",
    "NearSingularError", "NihiloFamily", "NihiloOp", "Region", "ScanReport",
    "StencilKind", "Topology", "VerifyReport", "admissible_sources",
    "assemble_green_matrix", "assemble_operator_matrix", "assembly_cells",
    "born_series", "causal_set", "cone_containment", "dense_oracle", "dual",
    "eval_family", "inner", "k_block", "kernel_dim", "lu_factor",
    "make_kernel_family", "make_klein_gordon", "make_multiplication",
    "make_nihilo_A", "make_null_wave", "make_rank_one", "modified_green",
    "moller", "moller_inverse", "pairing", "resolve_sources",
    "scan_exceptional", "support", "system_green", "verify_duality",
    "verify_index_duality", "verify_intertwining", "verify_system",
]

__version__ = "0.1.0"
