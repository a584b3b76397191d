"""Scenario-driven command line front end.

A scenario lives in a single TOML config file; every subcommand builds the
scenario, runs one verification suite and emits deterministic CSV/JSON data.
Exit codes: 0 all checks passed, 1 check failures, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .lattice import CellSet
from .green import CausalSolver, verify_duality, cone_containment
from .fredholm import (
    NearSingularError,
    born_series,
    dense_oracle,
    kernel_dim,
    modified_green,
    scan_exceptional,
    verify_index_duality,
)
from .moller import MollerMap, moller, moller_inverse, verify_intertwining
from .lusys import BlockSystem, verify_system
from . import recipes


class ConfigError(Exception):
    """Invalid or unreadable scenario configuration."""


@dataclass
class RunResult:
    """Outcome of one subcommand run."""

    name: str
    passed: bool = True
    checks: dict[str, bool] = field(default_factory=dict)
    residuals: dict[str, float] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    emitted: list[str] = field(default_factory=list)

    def check(self, key: str, ok: bool) -> None:
        self.checks[key] = bool(ok)
        if not ok:
            self.passed = False

    def residual(self, key: str, value: float, tol: float) -> None:
        self.residuals[key] = float(value)
        self.check(key, value <= tol)

    def failures(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_scan_csv(report, path: Path) -> None:
    lines = ["re_lambda,im_lambda,sigma_min,det_re,det_im"]
    lam = report.lambdas.ravel()
    sig = report.sigma_min.ravel()
    det = report.dets.ravel()
    for k in range(lam.size):
        lines.append(",".join([_fmt(lam[k].real), _fmt(lam[k].imag),
                               _fmt(sig[k]), _fmt(det[k].real), _fmt(det[k].imag)]))
    path.write_text("\n".join(lines) + "\n")


def emit_points_json(points, path: Path) -> None:
    items = []
    for p in points:
        items.append("{" + ", ".join([
            f'"lambda": [{_fmt(p.lam.real)}, {_fmt(p.lam.imag)}]',
            f'"sigma_min": {_fmt(p.sigma_min)}',
            f'"kernel_dim": {int(p.kernel_dim)}',
        ]) + "}")
    path.write_text("[" + ", ".join(items) + "]\n")


def parse_points_json(path: Path) -> list[dict]:
    return json.loads(path.read_text())


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def build_scenario(config: dict, seed_override: int | None = None) -> recipes.Scenario:
    sc = config.get("scenario", {})
    kind = sc.get("kind")
    if kind is None:
        raise ConfigError("scenario.kind is required")
    grid_cfg = config.get("grid", {})
    seed = seed_override if seed_override is not None else int(sc.get("seed", 0))
    common = dict(nt=int(grid_cfg.get("nt", 20)), nx=int(grid_cfg.get("nx", 12)))
    try:
        if kind == "kernel_gaussian":
            return recipes.random_kernel_scenario(
                degree=int(sc.get("degree", 1)), seed=seed,
                amplitude=float(sc.get("amplitude", 0.3)),
                mass=float(sc.get("mass", 0.0)), **common)
        if kind == "rank_one":
            return recipes.rank_one_scenario(seed=seed,
                                             mass=float(sc.get("mass", 0.0)), **common)
        if kind == "multiplication":
            return recipes.multiplication_scenario(
                seed=seed, amplitude=float(sc.get("amplitude", 0.8)),
                mass=float(sc.get("mass", 0.0)), **common)
        if kind == "nihilo":
            return recipes.nihilo_scenario(n_cells=int(sc.get("n_cells", 33)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad scenario parameters: {exc}") from exc
    raise ConfigError(f"unknown scenario kind {kind!r}")


def _lambdas(config: dict) -> list[complex]:
    raw = config.get("run", {}).get("lambdas", [[0.1, 0.0]])
    try:
        return [complex(float(re), float(im)) for re, im in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"run.lambdas must be [re, im] pairs: {exc}") from exc


def _signs(config: dict) -> list[str]:
    sign = config.get("run", {}).get("sign", "both")
    if sign == "both":
        return ["+", "-"]
    if sign in ("+", "-"):
        return [sign]
    raise ConfigError("run.sign must be '+', '-' or 'both'")


def _trials(config: dict, default: int = 10) -> int:
    return int(config.get("run", {}).get("trials", default))


def _rng(config: dict, seed_override: int | None) -> np.random.Generator:
    seed = seed_override if seed_override is not None else \
        int(config.get("scenario", {}).get("seed", 0))
    return np.random.default_rng(seed + 1)


def run_green(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("green")
    scenario = build_scenario(config, seed)
    solver = scenario.solver
    rng = _rng(config, seed)
    grid = scenario.grid
    for t in range(_trials(config)):
        f = recipes.random_source(grid, rng)
        g = recipes.random_source(grid, rng)
        scale_f = max(f.norm_inf(), 1e-300)
        for sign, direction in (("+", "future"), ("-", "past")):
            u = solver.green(f, sign)
            result.residual(f"PE{sign}f trial {t}",
                            (solver.op(u) - f).norm_inf() / scale_f, 1e-12)
            result.residual(f"E{sign}Pg trial {t}",
                            (solver.green(solver.op(g), sign) - g).norm_inf()
                            / max(g.norm_inf(), 1e-300), 1e-11)
            result.check(f"cone E{sign}f trial {t}",
                         cone_containment(f, u, direction))
    duality = verify_duality(solver)
    for key, val in duality.metrics.items():
        result.residual(f"duality {key}", val, 1e-12)
    return result


def run_modified(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("modified")
    scenario = build_scenario(config, seed)
    solver, family = scenario.solver, scenario.family
    rng = _rng(config, seed)
    grid = scenario.grid
    P = scenario.op
    for lam in _lambdas(config):
        A = family.evaluate(lam)
        for sign in _signs(config):
            f = recipes.random_source(grid, rng)
            scale = max(f.norm_inf(), 1e-300)
            try:
                u = modified_green(solver, family, lam, sign, f)
            except NearSingularError as exc:
                result.check(f"non-exceptional lambda={lam}", False)
                result.residuals[f"sigma_min lambda={lam}"] = exc.sigma_min
                continue
            result.residual(f"(P+A)E~{sign}f lambda={lam}",
                            (P(u) + A(u) - f).norm_inf() / scale, 1e-10)
            g = recipes.random_source(grid, rng)
            back = modified_green(solver, family, lam, sign, P(g) + A(g))
            result.residual(f"E~{sign}(P+A)g lambda={lam}",
                            (back - g).norm_inf() / max(g.norm_inf(), 1e-300), 1e-10)
            oracle = dense_oracle(solver, family, lam, sign, f)
            result.residual(f"oracle match {sign} lambda={lam}",
                            (u - oracle).norm_inf() / max(oracle.norm_inf(), 1e-300),
                            1e-8)
            direction = "future" if sign == "+" else "past"
            result.check(f"(G3') containment {sign} lambda={lam}",
                         cone_containment(f, u, direction,
                                          extra=scenario.region.cells))
    return result


def run_scan(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("scan")
    scenario = build_scenario(config, seed)
    scan_cfg = config.get("scan", {})
    window = tuple(float(x) for x in scan_cfg.get("window", [-2.0, 2.0, -2.0, 2.0]))
    if len(window) != 4:
        raise ConfigError("scan.window must be [re0, re1, im0, im1]")
    resolution = int(scan_cfg.get("resolution", 41))
    tau = float(scan_cfg.get("tau_sing", 1e-8))
    for sign in _signs(config):
        t0 = time.perf_counter()
        report = scan_exceptional(scenario.solver, scenario.family, window,
                                  resolution, sign, tau)
        result.timings[f"scan {sign}"] = time.perf_counter() - t0
        tag = "plus" if sign == "+" else "minus"
        csv_path = out / f"scan_{tag}.csv"
        json_path = out / f"points_{tag}.json"
        emit_scan_csv(report, csv_path)
        emit_points_json(report.points, json_path)
        result.emitted += [str(csv_path), str(json_path)]
        result.check(f"lambda=0 non-exceptional {sign}",
                     all(abs(p.lam) > 1e-12 for p in report.points))
        result.residuals[f"points found {sign}"] = float(len(report.points))
    return result


def run_born(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("born")
    scenario = build_scenario(config, seed)
    rng = _rng(config, seed)
    f = recipes.random_source(scenario.grid, rng)
    n_max = int(config.get("run", {}).get("born_orders", 8))
    rows = ["re_lambda,im_lambda,sign,order,increment_norm,diverged"]
    for lam in _lambdas(config):
        for sign in _signs(config):
            series = born_series(scenario.solver, scenario.family, lam, sign, f, n_max)
            for k, inc in enumerate(series.increment_norms):
                rows.append(",".join([_fmt(lam.real), _fmt(lam.imag), sign,
                                      str(k), _fmt(inc), str(int(series.diverged))]))
            if not series.diverged:
                target = modified_green(scenario.solver, scenario.family, lam, sign, f)
                err = (series.partial_sums[-1] - target).norm_inf()
                result.residuals[f"final error {sign} lambda={lam}"] = err
    path = out / "born.csv"
    path.write_text("\n".join(rows) + "\n")
    result.emitted.append(str(path))
    return result


def run_moller(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("moller")
    scenario = build_scenario(config, seed)
    rng = _rng(config, seed)
    for lam in _lambdas(config):
        for direction in ("retarded", "advanced"):
            mmap = MollerMap(direction, lam, scenario.solver, scenario.family)
            for t in range(_trials(config, 5)):
                phi = recipes.random_source(scenario.grid, rng,
                                            cells=CellSet.full(scenario.grid))
                round_trip = moller(mmap, moller_inverse(mmap, phi))
                result.residual(f"r o r^-1 {direction} lambda={lam} trial {t}",
                                (round_trip - phi).norm_inf()
                                / max(phi.norm_inf(), 1e-300), 1e-10)
            f = recipes.random_source(scenario.grid, rng)
            rep = verify_intertwining(mmap, f)
            for key, val in rep.metrics.items():
                result.residual(f"{direction} lambda={lam} {key}", val, 1e-9)
            for key, ok in rep.details.items():
                result.check(f"{direction} lambda={lam} {key}", ok)
    return result


def run_index(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("index")
    scenario = build_scenario(config, seed)
    scan_cfg = config.get("scan", {})
    window = tuple(float(x) for x in scan_cfg.get("window", [-2.0, 2.0, -2.0, 2.0]))
    resolution = int(scan_cfg.get("resolution", 41))
    report = scan_exceptional(scenario.solver, scenario.family, window,
                              resolution, "+")
    result.residuals["points found"] = float(len(report.points))
    for p in report.points:
        rep = verify_index_duality(scenario.solver, scenario.family, p.lam)
        for key, ok in rep.details.items():
            if isinstance(ok, bool):
                result.check(f"lambda={p.lam:.6g} {key}", ok)
        for key, val in rep.metrics.items():
            result.residual(f"lambda={p.lam:.6g} {key}", val, 1e-8)
    return result


def run_lu(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("lu")
    scenario = build_scenario(config, seed)
    rng = _rng(config, seed)
    n = int(config.get("run", {}).get("system_size", 2))
    lam = _lambdas(config)[0]
    system = _random_system(scenario, n, lam, rng)
    for sign in _signs(config):
        rep = verify_system(system, sign, trials=_trials(config, 5), rng=rng)
        for key, val in rep.metrics.items():
            result.residual(f"{sign} {key}", val, 1e-9)
        for key, ok in rep.details.items():
            result.check(f"{sign} {key}", ok)
    return result


def _random_system(scenario: recipes.Scenario, n: int, lam: complex,
                   rng: np.random.Generator,
                   coupling_amplitude: float = 0.2) -> BlockSystem:
    from .operators import KernelOp, make_kernel_family, make_klein_gordon

    region = scenario.region
    grid = scenario.grid
    size = region.size
    scale = coupling_amplitude / (size * grid.weight)
    diag = []
    for i in range(n):
        mass = float(rng.uniform(0.0, 1.0))
        P = make_klein_gordon(grid, mass=mass)
        coeff = scale * (rng.standard_normal((size, size))
                         + 1j * rng.standard_normal((size, size)))
        diag.append((P, make_kernel_family(region, [coeff])))
    offdiag = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                coeff = scale * (rng.standard_normal((size, size))
                                 + 1j * rng.standard_normal((size, size)))
                offdiag[(i, j)] = make_kernel_family(region, [coeff])
    return BlockSystem(diag, offdiag, region, lam)


def run_nihilo(config: dict, out: Path, seed: int | None) -> RunResult:
    result = RunResult("nihilo")
    base = int(config.get("scenario", {}).get("n_cells", 33))
    dims = {}
    rows = ["n_cells,kernel_dim,expected_min"]
    for n_cells in (base, 2 * base - 1):
        scenario = recipes.nihilo_scenario(n_cells)
        info = kernel_dim(scenario.solver, scenario.family, 1.0, "+")
        expected = len(scenario.extras["kernel_u_indices"])
        dims[n_cells] = info.dim
        rows.append(f"{n_cells},{info.dim},{expected}")
        result.check(f"dim at n={n_cells} >= {expected}", info.dim >= expected)
    result.check("resolution doubling at least doubles dim",
                 dims[2 * base - 1] >= 2 * dims[base] - 1)
    path = out / "nihilo.csv"
    path.write_text("\n".join(rows) + "\n")
    result.emitted.append(str(path))
    return result


_RUNNERS = {
    "green": run_green,
    "modified": run_modified,
    "scan": run_scan,
    "born": run_born,
    "moller": run_moller,
    "index": run_index,
    "lu": run_lu,
    "nihilo": run_nihilo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kngreen",
        description="Verification suites for K-nonlocal Green operators on lattices")
    parser.add_argument("subcommand", choices=sorted(_RUNNERS))
    parser.add_argument("--config", required=True, help="TOML scenario file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override scenario seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallelism hint (scans are pure per-lambda)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = _RUNNERS[args.subcommand](config, out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = "PASS" if result.passed else "FAIL"
    print(f"{result.name}: {status} "
          f"({sum(result.checks.values())}/{len(result.checks)} checks)")
    if not result.passed:
        print(json.dumps({"failures": result.failures()}))
    for path in result.emitted:
        print(f"wrote {path}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
