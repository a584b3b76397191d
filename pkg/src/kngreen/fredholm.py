"""Inversion of I + A(lambda)E+- and everything built on it.

The composition A(lambda)E+- restricted to sources supported in K is a dense
|K| x |K| matrix B (value basis, one causal march per K cell).  Inverting
I + B on the K block extends to all admissible sources through the identity

    (I + A E)^{-1} = I - A E + A E (I_K + A E)^{-1} A E,

which yields the modified Green operators E+-(I + A E+-)^{-1}, their Born
expansion, exceptional-point scanning via sigma_min/det of I + B(lambda),
kernel dimensions, the index-duality check against the dual operator, and an
independent dense full-grid oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    GridFunction,
    Region,
    Topology,
    causal_set,
    support,
)
from .operators import DiffOp, KernelFamily, KernelOp, StencilKind
from .green import CausalSolver, DenseCapError, DENSE_CELL_CAP
from .report import VerifyReport

DEFAULT_TAU_SING = 1e-8


class NearSingularError(RuntimeError):
    """lambda is within tolerance of an exceptional point."""

    def __init__(self, sigma_min: float, lam: complex, stage: int | None = None):
        self.sigma_min = sigma_min
        self.lam = lam
        self.stage = stage
        where = f" at block stage {stage}" if stage is not None else ""
        super().__init__(f"I + B({lam}) is near singular{where}: sigma_min={sigma_min:.3e}")


@dataclass(frozen=True)
class KBlock:
    """Value-basis K x K restriction of A(lambda)E+-."""

    sign: str
    lam: complex
    region: Region
    matrix: np.ndarray


@dataclass
class ExceptionalPoint:
    lam: complex
    sigma_min: float
    kernel_dim: int
    det_residual: float
    refined: bool


@dataclass
class ScanReport:
    sign: str
    window: tuple[float, float, float, float]
    resolution: tuple[int, int]
    lambdas: np.ndarray
    sigma_min: np.ndarray
    dets: np.ndarray
    points: list[ExceptionalPoint] = field(default_factory=list)
    tau_sing: float = DEFAULT_TAU_SING
    clusters: list[tuple[complex, complex]] = field(default_factory=list)


@dataclass
class KernelInfo:
    dim: int
    block_basis: list[np.ndarray]
    solutions: list[GridFunction]
    residuals: list[float]


@dataclass
class BornSeries:
    partial_sums: list[GridFunction]
    increment_norms: list[float]
    diverged: bool


def _check_defining_rows(f: GridFunction) -> None:
    """Sources may occupy any defining row; the margins never carry equations."""
    v = f.values
    if f.grid.topology is Topology.TIME_BOUNDED_CIRCLE:
        bad = np.any(v[0] != 0) or np.any(v[-1] != 0)
    else:
        bad = np.any(v[0] != 0) or np.any(v[:, 0] != 0)
    if bad:
        raise ValueError("source must vanish on the initial data rows")


def _interaction(family, lam: complex):
    return family.evaluate(lam)


def k_block(solver: CausalSolver, family, lam: complex, sign: str) -> KBlock:
    """Matrix of A(lambda)E+- on K-supported value vectors."""
    region = family.region
    A = _interaction(family, lam)
    if isinstance(A, KernelOp):
        G = solver.region_green_block(region, sign)
        matrix = A.value_matrix @ G
    else:
        matrix = np.empty((region.size, region.size), dtype=complex)
        for q, cell in enumerate(region.cell_list):
            col = solver.green(GridFunction.impulse(solver.grid, cell), sign)
            matrix[:, q] = region.extract(A(col))
    return KBlock(sign, lam, region, matrix)


def _checked_system(block: KBlock, tau_sing: float, stage: int | None = None):
    M = np.eye(block.region.size) + block.matrix
    svals = np.linalg.svd(M, compute_uv=False)
    sigma_max = float(svals[0])
    sigma_min = float(svals[-1])
    if sigma_min <= tau_sing * max(sigma_max, 1.0):
        raise NearSingularError(sigma_min, block.lam, stage)
    return M


def resolve_sources(solver: CausalSolver, family, lam: complex, sign: str,
                    f: GridFunction, tau_sing: float = DEFAULT_TAU_SING,
                    block: KBlock | None = None) -> GridFunction:
    """g with g + A(lambda)E+- g = f, via the K-block inverse.

    When the interaction never enlarges supports, the K solve is confined to
    K intersected with the causal cone of f, so the result keeps exact zeros
    outside that cone.
    """
    _check_defining_rows(f)
    region = family.region
    if block is None:
        block = k_block(solver, family, lam, sign)
    A = _interaction(family, lam)
    g1 = A(solver.green(f, sign))
    y = region.extract(g1)
    M = _checked_system(block, tau_sing)
    if getattr(family, "support_nonincreasing", False):
        direction = "future" if sign == "+" else "past"
        cone = causal_set(f.grid, support(f), direction)
        idx = [k for k, cell in enumerate(region.cell_list) if cell in cone]
        z = np.zeros(region.size, dtype=complex)
        if idx:
            sub = np.ix_(idx, idx)
            z[idx] = np.linalg.solve(M[sub], y[idx])
    else:
        z = np.linalg.solve(M, y)
    correction = region.embed(block.matrix @ z)
    return f - g1 + correction


def modified_green(solver: CausalSolver, family, lam: complex, sign: str,
                   f: GridFunction, tau_sing: float = DEFAULT_TAU_SING,
                   block: KBlock | None = None) -> GridFunction:
    """E~+-(lambda) f = E+- (I + A(lambda)E+-)^{-1} f."""
    g = resolve_sources(solver, family, lam, sign, f, tau_sing, block)
    return solver.green(g, sign)


def born_series(solver: CausalSolver, family, lam: complex, sign: str,
                f: GridFunction, n_max: int) -> BornSeries:
    """Partial sums sum_{k<=n} E+- (-A(lambda)E+-)^k f for n = 0..n_max."""
    _check_defining_rows(f)
    A = _interaction(family, lam)
    term = f
    current = solver.green(term, sign)
    sums = [current]
    increments = [current.norm_inf()]
    for _ in range(n_max):
        term = -A(solver.green(term, sign))
        delta = solver.green(term, sign)
        current = current + delta
        sums.append(current)
        increments.append(delta.norm_inf())
    diverged = (len(increments) >= 3 and increments[1] > 0
                and increments[-1] > increments[1])
    return BornSeries(sums, increments, diverged)


def _family_value_blocks(solver: CausalSolver, family, sign: str) -> list[np.ndarray]:
    """Coefficient blocks C_k so that B(lambda) = sum lambda^k C_k."""
    region = family.region
    if isinstance(family, KernelFamily):
        G = solver.region_green_block(region, sign)
        w = region.grid.weight
        return [(w * rho) @ G for rho in family.coefficients]
    if family.degree == 1:
        return [k_block(solver, family, 1.0, sign).matrix]
    raise TypeError("scanning needs a KernelFamily or a degree-one family")


def _block_at(blocks: list[np.ndarray], lam: complex) -> np.ndarray:
    B = np.zeros_like(blocks[0])
    power = 1.0 + 0.0j
    for C in blocks:
        power = power * lam
        B = B + power * C
    return B


def _det_at(blocks: list[np.ndarray], lam: complex) -> complex:
    n = blocks[0].shape[0]
    return complex(np.linalg.det(np.eye(n) + _block_at(blocks, lam)))


def _refine_secant(blocks: list[np.ndarray], lam0: complex, step: complex,
                   det_tol: float, max_iter: int = 50):
    """Complex secant iteration on det(I + B(lambda))."""
    l_prev, l_cur = lam0, lam0 + step
    d_prev, d_cur = _det_at(blocks, l_prev), _det_at(blocks, l_cur)
    radius = abs(step)
    for _ in range(max_iter):
        if abs(d_cur) <= det_tol:
            return l_cur, abs(d_cur), radius, True
        denom = d_cur - d_prev
        if denom == 0:
            break
        l_next = l_cur - d_cur * (l_cur - l_prev) / denom
        radius = abs(l_next - l_cur)
        l_prev, d_prev = l_cur, d_cur
        l_cur, d_cur = l_next, _det_at(blocks, l_next)
    return l_cur, abs(d_cur), radius, abs(d_cur) <= det_tol


def scan_exceptional(solver: CausalSolver, family,
                     window: tuple[float, float, float, float],
                     resolution: int | tuple[int, int] = 41,
                     sign: str = "+",
                     tau_sing: float = DEFAULT_TAU_SING) -> ScanReport:
    """Locate zeros of det(I + B+-(lambda)) in a complex rectangle.

    Samples sigma_min and det on the lambda grid; every strict local minimum
    of sigma_min seeds a secant refinement on det (det is polynomial in lambda
    for polynomial families, so near-misses between grid points still converge
    to the true zero).  A refined point is accepted only if the determinant
    converged, sigma_min collapses below tau_sing there and it lies in the
    (slightly padded) window.  lambda = 0 is never exceptional since B(0)=0.
    """
    re0, re1, im0, im1 = window
    if isinstance(resolution, int):
        res = (resolution, resolution)
    else:
        res = tuple(resolution)
    res_re, res_im = res
    blocks = _family_value_blocks(solver, family, sign)
    n = blocks[0].shape[0]
    eye = np.eye(n)
    res_grid_re = np.linspace(re0, re1, res_re)
    res_grid_im = np.linspace(im0, im1, res_im)
    lambdas = res_grid_re[None, :] + 1j * res_grid_im[:, None]
    sigma = np.empty(lambdas.shape, dtype=float)
    dets = np.empty(lambdas.shape, dtype=complex)
    for a in range(res_im):
        for b in range(res_re):
            M = eye + _block_at(blocks, lambdas[a, b])
            sigma[a, b] = np.linalg.svd(M, compute_uv=False)[-1]
            dets[a, b] = np.linalg.det(M)
    report = ScanReport(sign, window, (res_re, res_im), lambdas, sigma, dets,
                        tau_sing=tau_sing)
    spacing = max((re1 - re0) / max(res_re - 1, 1), (im1 - im0) / max(res_im - 1, 1))
    det_tol = 1e-12 * (1.0 + abs(dets[0, 0]))
    candidates = _strict_local_minima(sigma)
    found: list[ExceptionalPoint] = []
    for a, b in candidates:
        lam0 = lambdas[a, b]
        step = 0.25 * spacing * (1.0 + 0.5j) / abs(1.0 + 0.5j)
        lam, det_res, radius, converged = _refine_secant(blocks, lam0, step, det_tol)
        if not converged:
            continue
        pad = spacing
        if not (re0 - pad <= lam.real <= re1 + pad and im0 - pad <= lam.imag <= im1 + pad):
            continue
        M = eye + _block_at(blocks, lam)
        svals = np.linalg.svd(M, compute_uv=False)
        smin, smax = float(svals[-1]), float(svals[0])
        if smin > tau_sing * max(smax, 1.0):
            continue
        dim = int(np.sum(svals <= tau_sing * max(smax, 1.0)))
        point = ExceptionalPoint(lam, smin, dim, det_res, True)
        duplicate = False
        for other in found:
            sep = abs(other.lam - lam)
            if sep <= 1e-8 * (1.0 + abs(lam)):
                duplicate = True
                break
            if sep <= 2 * max(radius, 1e-12):
                report.clusters.append((other.lam, lam))
        if not duplicate:
            found.append(point)
    report.points = sorted(found, key=lambda p: (p.lam.real, p.lam.imag))
    return report


def _strict_local_minima(sigma: np.ndarray) -> list[tuple[int, int]]:
    rows, cols = sigma.shape
    out = []
    for a in range(rows):
        for b in range(cols):
            val = sigma[a, b]
            neighbors = [sigma[a + da, b + db]
                         for da in (-1, 0, 1) for db in (-1, 0, 1)
                         if (da, db) != (0, 0)
                         and 0 <= a + da < rows and 0 <= b + db < cols]
            if all(val < nb for nb in neighbors):
                out.append((a, b))
    return out


def kernel_dim(solver: CausalSolver, family, lam: complex, sign: str,
               tau: float = DEFAULT_TAU_SING) -> KernelInfo:
    """Kernel of I + B+-(lambda) and the matching past/future-compact solutions.

    Each kernel vector h gives a solution E+- h of (P + A(lambda)) phi = 0,
    supported in the causal cone of K.
    """
    block = k_block(solver, family, lam, sign)
    M = np.eye(block.region.size) + block.matrix
    _, svals, vh = np.linalg.svd(M)
    sigma_max = max(float(svals[0]), 1.0)
    small = svals <= tau * sigma_max
    dim = int(np.sum(small))
    basis = [np.conj(vh[k]) for k in range(len(svals)) if small[k]]
    A = _interaction(family, lam)
    P = solver.op
    solutions = []
    residuals = []
    for h_vec in basis:
        h = block.region.embed(h_vec)
        phi = solver.green(h, sign)
        res = (P(phi) + A(phi)).norm_inf() / max(h.norm_inf(), 1e-300)
        solutions.append(phi)
        residuals.append(float(res))
    return KernelInfo(dim, basis, solutions, residuals)


def verify_index_duality(solver: CausalSolver, family, lam: complex,
                         tau: float = DEFAULT_TAU_SING) -> VerifyReport:
    """Check N+-(P, A) = N-+(P^t, A^t) and the A(lambda)Gamma kernel injection."""
    report = VerifyReport("index-duality")
    dual_solver = CausalSolver(solver.op.dual())
    dual_family = family.dual()
    dims = {}
    blocks = {}
    for sign in ("+", "-"):
        blk = k_block(solver, family, lam, sign)
        blocks[("primal", sign)] = blk
        dims[("primal", sign)] = _svd_kernel_dim(blk, tau)
        blk_t = k_block(dual_solver, dual_family, lam, sign)
        blocks[("dual", sign)] = blk_t
        dims[("dual", sign)] = _svd_kernel_dim(blk_t, tau)
    report.details["dims"] = {f"{side}{sign}": d for (side, sign), d in dims.items()}
    report.require("N+ == N_t-", dims[("primal", "+")] == dims[("dual", "-")])
    report.require("N- == N_t+", dims[("primal", "-")] == dims[("dual", "+")])

    A = _interaction(family, lam)
    for sign, anti in (("+", "-"), ("-", "+")):
        blk_t = blocks[("dual", sign)]
        M_t = np.eye(blk_t.region.size) + blk_t.matrix
        u_mat, svals, _ = np.linalg.svd(M_t)
        sigma_max = max(float(svals[0]), 1.0)
        small = svals <= tau * sigma_max
        conj_kernel = [u_mat[:, k] for k in range(len(svals)) if small[k]]
        if not conj_kernel:
            continue
        M_anti = np.eye(blk_t.region.size) + blocks[("primal", anti)].matrix
        images = []
        for vec in conj_kernel:
            z = blk_t.region.extract(A(blk_t.region.embed(np.conj(vec))))
            res = float(np.linalg.norm(M_anti @ z) / max(np.linalg.norm(z), 1e-300))
            report.record(f"AGamma residual {sign}->{anti} #{len(images)}", res, 1e-8)
            images.append(z)
        stacked = np.column_stack(images)
        rank = int(np.linalg.matrix_rank(stacked, tol=1e-8 * np.linalg.norm(stacked)))
        report.require(f"AGamma images independent {sign}->{anti}",
                       rank == len(images))
    return report


def _svd_kernel_dim(block: KBlock, tau: float) -> int:
    M = np.eye(block.region.size) + block.matrix
    svals = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(svals <= tau * max(float(svals[0]), 1.0)))


def dense_oracle(solver: CausalSolver, family, lam: complex, sign: str,
                 f: GridFunction, max_cells: int = DENSE_CELL_CAP) -> GridFunction:
    """Brute-force modified Green operator: one dense full-grid solve.

    Assembles the square system whose rows force the causal data (two zero
    initial or final rows; on the null square the initial/final null edges)
    and impose the (P + A(lambda)) equations elsewhere, then solves it.
    Independent of the march + K-block path.
    """
    grid = solver.grid
    N = grid.ncells
    if N > max_cells:
        raise DenseCapError(f"grid has {N} cells, cap is {max_cells}")
    _check_defining_rows(f)
    PA = _dense_stencil(solver.op) + _dense_interaction(family, lam)
    S = np.zeros((N, N), dtype=complex)
    b = np.zeros(N, dtype=complex)
    nx = grid.nx

    def flat(n, j):
        return n * nx + j

    if grid.topology is Topology.TIME_BOUNDED_CIRCLE:
        if sign == "+":
            data_rows, first_eq = (0, 1), 2
            eq_rows = range(2, grid.nt)
            eq_of = lambda n: n - 1
        else:
            data_rows = (grid.nt - 2, grid.nt - 1)
            eq_rows = range(0, grid.nt - 2)
            eq_of = lambda n: n + 1
        for n in data_rows:
            for j in range(nx):
                S[flat(n, j), flat(n, j)] = 1.0
        for n in eq_rows:
            m = eq_of(n)
            for j in range(nx):
                S[flat(n, j)] = PA[flat(m, j)]
                b[flat(n, j)] = f.values[m, j]
    else:
        if sign == "+":
            zero_row, zero_col = 0, 0
            slot = lambda i, j: flat(i, j)
        else:
            zero_row, zero_col = grid.nt - 1, grid.nx - 1
            slot = lambda i, j: flat(i - 1, j - 1)
        for j in range(nx):
            S[flat(zero_row, j), flat(zero_row, j)] = 1.0
        for i in range(grid.nt):
            if i != zero_row:
                S[flat(i, zero_col), flat(i, zero_col)] = 1.0
        for i in range(1, grid.nt):
            for j in range(1, nx):
                S[slot(i, j)] = PA[flat(i, j)]
                b[slot(i, j)] = f.values[i, j]

    svals = np.linalg.svd(S, compute_uv=False)
    if svals[-1] <= 1e-10 * max(svals[0], 1.0):
        raise NearSingularError(float(svals[-1]), lam)
    u = np.linalg.solve(S, b)
    return GridFunction(grid, u.reshape(grid.shape))


def _dense_stencil(op: DiffOp) -> np.ndarray:
    grid = op.grid
    N = grid.ncells
    nx = grid.nx
    M = np.zeros((N, N), dtype=complex)
    if op.kind is StencilKind.KLEIN_GORDON:
        dt2, dx2 = grid.dt ** 2, grid.dx ** 2
        m2 = op.mass ** 2
        V = op.potential.values if op.potential is not None else None
        for n in range(1, grid.nt - 1):
            for j in range(nx):
                r = n * nx + j
                M[r, (n + 1) * nx + j] += 1.0 / dt2
                M[r, (n - 1) * nx + j] += 1.0 / dt2
                diag = -2.0 / dt2 + 2.0 / dx2 + m2
                if V is not None:
                    diag = diag + V[n, j]
                M[r, r] += diag
                M[r, n * nx + (j + 1) % nx] += -1.0 / dx2
                M[r, n * nx + (j - 1) % nx] += -1.0 / dx2
    else:
        w = grid.weight
        for i in range(1, grid.nt):
            for j in range(1, nx):
                r = i * nx + j
                M[r, r] += 1.0 / w
                M[r, (i - 1) * nx + j] += -1.0 / w
                M[r, i * nx + (j - 1)] += -1.0 / w
                M[r, (i - 1) * nx + (j - 1)] += 1.0 / w
    return M


def _dense_interaction(family, lam: complex) -> np.ndarray:
    A = _interaction(family, lam)
    grid = A.grid
    N = grid.ncells
    M = np.zeros((N, N), dtype=complex)
    if isinstance(A, KernelOp):
        region = A.region
        flats = [n * grid.nx + j for n, j in region.cell_list]
        vm = A.value_matrix
        for a, fa in enumerate(flats):
            M[fa, flats] = vm[a]
        return M
    for q in range(N):
        cell = divmod(q, grid.nx)
        col = A(GridFunction.impulse(grid, cell))
        M[:, q] = col.values.reshape(-1)
    return M
