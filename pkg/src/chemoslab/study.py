"""Study orchestration and output writing.

A study builds the scenario, runs a fine-grid Keller-Segel reference,
integrates the kinetic model for each configured epsilon (optionally in
worker processes) and reduces the trajectories to error tables and rate
fits. Results are merged by configured index, so output files do not depend
on scheduling.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import __version__
from .asymptotics import BOUND_NAMES, decompose_remainders, fit_rate, theorem_bounds_report
from .config import StudyConfig
from .errors import ChemoslabError, ConfigurationError, SolverError
from .keller_segel import run_ks, snapshot_steps
from .kinetic import SolverOptions, run_kinetic
from .model import build_problem, limit_coefficients, validate_compatibility
from .quadrature_mesh import gauss_legendre, l2_x, make_timegrid

RATES_COLUMNS = ("epsilon", "err_combined", "err_b", "err_c", "iters_max", "warnings")
BOUNDS_COLUMNS = ("epsilon",) + BOUND_NAMES
SNAPSHOT_COLUMNS = ("epsilon", "t", "x", "ubar_eps", "ubar0", "cbar_eps", "cbar0")
FIT_COLUMNS = ("quantity", "slope", "intercept", "r_squared", "gate_lo", "gate_hi", "passed")
REFINEMENT_COLUMNS = ("solver", "level", "n_x", "n_t", "difference", "order")


@dataclass
class RunRow:
    epsilon: float
    err_combined: float = math.nan
    err_b: float = math.nan
    err_c: float = math.nan
    iters_max: int = 0
    warnings: list[str] = field(default_factory=list)
    error: str | None = None
    bounds: dict = field(default_factory=dict)
    vbar_u1_residual: float = math.nan
    phibar_residual: float = math.nan
    cap_hits: int = 0
    direct_steps: int = 0


@dataclass
class StudyResult:
    kind: str
    config: StudyConfig
    rows: list[RunRow] = field(default_factory=list)
    snapshots: list[tuple] = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    gates: dict = field(default_factory=dict)
    refinement: list[tuple] = field(default_factory=list)
    compatibility: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def failures(self) -> list[str]:
        return [f"epsilon={r.epsilon}: {r.error}" for r in self.rows if r.error]

    @property
    def gates_passed(self) -> bool:
        return all(g["passed"] for g in self.gates.values())


def solver_options(cfg: StudyConfig) -> SolverOptions:
    s = cfg.solver
    return SolverOptions(
        source_iter_tol=s.source_iter_tol, source_iter_max=s.source_iter_max,
        picard_iters=s.picard_iters, method=s.method, scheme=s.scheme, theta=s.theta,
    )


def build_setup(cfg: StudyConfig, n_x: int | None = None):
    return build_problem(cfg.scenario.as_mapping(), n_x=n_x or cfg.grids.n_x)


def reference_run(cfg: StudyConfig, base, q, refine_x: int, refine_t: int):
    """Keller-Segel run on a finer grid, injected onto the study grid."""
    n_t = cfg.grids.n_t
    steps = snapshot_steps(n_t, cfg.output.snapshots)
    ref = base if refine_x == 1 else base.on_mesh(base.mesh.n_x * refine_x)
    grid = make_timegrid(base.T, n_t * refine_t)
    ks = run_ks(ref, grid, limit_coefficients(ref, q), steps=steps * refine_t)
    return ks.restrict(refine_x, refine_t)


def _run_member(cfg_json: str, epsilon: float, ks):
    """One kinetic run plus its reductions; executed in a worker or inline."""
    cfg = StudyConfig.model_validate_json(cfg_json)
    base = build_setup(cfg)
    q = gauss_legendre(cfg.grids.n_v)
    grid = make_timegrid(base.T, cfg.grids.n_t)
    row = RunRow(epsilon=epsilon)
    try:
        setup = base.with_epsilon(epsilon)
        traj = run_kinetic(setup, q, grid, solver_options(cfg), coupling=cfg.solver.coupling,
                           steps=ks.steps)
        rep = decompose_remainders(traj, ks, setup, q)
    except SolverError as exc:
        row.error = str(exc)
        return row, None
    row.err_combined = rep.combined_error
    row.err_b = rep.err_b
    row.err_c = rep.err_c
    row.iters_max = traj.iters_max
    row.warnings = list(traj.warnings)
    row.bounds = theorem_bounds_report(traj, setup, q)
    row.vbar_u1_residual = rep.vbar_u1_residual
    row.phibar_residual = rep.phibar_residual
    row.cap_hits = traj.cap_hits
    row.direct_steps = sum(m == "direct" for m in traj.methods)
    return row, traj


def _map_members(cfg: StudyConfig, epsilons, ks, jobs: int):
    cfg_json = cfg.model_dump_json()
    if jobs > 1 and len(epsilons) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_member, cfg_json, eps, ks) for eps in epsilons]
            return [f.result() for f in futures]
    return [_run_member(cfg_json, eps, ks) for eps in epsilons]


def _gate(value, lo, hi, extra_ok=True, **info):
    ok = bool(value is not None and math.isfinite(value) and lo <= value <= hi and extra_ok)
    return {"value": value, "lo": lo, "hi": hi, "passed": ok, **info}


def _fit_and_gate(result: StudyResult, rows):
    gates = result.config.study.gates
    good = [r for r in rows if r.error is None]
    eps = [r.epsilon for r in good]
    for name, attr, (lo, hi) in (
        ("combined", "err_combined", gates.combined),
        ("b", "err_b", gates.b),
        ("c", "err_c", gates.c),
    ):
        errs = [getattr(r, attr) for r in good]
        try:
            fit = fit_rate(eps, errs)
        except ChemoslabError as exc:
            result.gates[f"slope_{name}"] = {"value": None, "lo": lo, "hi": hi, "passed": False, "reason": str(exc)}
            continue
        result.fits[name] = fit
        r2_ok = fit.r_squared >= gates.r2_min if name == "combined" else True
        result.gates[f"slope_{name}"] = _gate(fit.slope, lo, hi, r2_ok, r_squared=fit.r_squared,
                                              r2_min=gates.r2_min if name == "combined" else None)


def _snapshot_rows(eps, traj, ks, mesh):
    rows = []
    for j, t in enumerate(traj.times):
        for i, x in enumerate(mesh.x):
            rows.append((eps, float(t), float(x), float(traj.ubar[j, i]), float(ks.ubar0[j, i]),
                         float(traj.cbar[j, i]), float(ks.cbar0[j, i])))
    return rows


def _refinement_study(cfg: StudyConfig, result: StudyResult, base, q):
    """Successive-level differences for both solvers on the coarsest grid."""
    eps = cfg.epsilons()[0]
    levels = cfg.study.levels
    n_x0, n_t0 = cfg.grids.n_x, cfg.grids.n_t
    steps0 = snapshot_steps(n_t0, cfg.output.snapshots)
    opts = solver_options(cfg)
    ks_runs, kin_runs = [], []
    for j in range(levels):
        f = 2**j
        s = base.on_mesh(n_x0 * f) if f > 1 else base
        grid = make_timegrid(base.T, n_t0 * f)
        ks_runs.append(run_ks(s, grid, limit_coefficients(s, q), steps=steps0 * f).restrict(f, f).ubar0)
        tr = run_kinetic(s.with_epsilon(eps), q, grid, opts, coupling=cfg.solver.coupling, steps=steps0 * f)
        kin_runs.append(tr.ubar[:, ::f])
    for name, runs in (("keller_segel", ks_runs), ("kinetic", kin_runs)):
        diffs = [max(l2_x(a - b, base.mesh) for a, b in zip(runs[j], runs[j + 1])) for j in range(levels - 1)]
        for j, d in enumerate(diffs):
            order = math.log2(diffs[j - 1] / d) if j > 0 and d > 0 and diffs[j - 1] > 0 else math.nan
            result.refinement.append((name, j, n_x0 * 2**j, n_t0 * 2**j, d, order))


def run_study(cfg: StudyConfig, jobs: int = 1) -> StudyResult:
    """Run the configured study; per-run solver failures are recorded, not raised."""
    t_start = time.perf_counter()
    result = StudyResult(kind=cfg.study.kind, config=cfg)
    base = build_setup(cfg)
    q = gauss_legendre(cfg.grids.n_v)
    compat = validate_compatibility(base)
    result.compatibility = {"passed": compat.passed, "method": compat.method, "tol": compat.tol,
                            "max_residual": compat.max_residual}
    if not compat.passed:
        msg = f"compatibility conditions fail (max residual {compat.max_residual:.3e})"
        if not cfg.study.allow_incompatible:
            raise ConfigurationError(msg + "; set study.allow_incompatible to override")
        result.warnings.append(msg)

    if cfg.study.kind == "mesh_refinement":
        _refinement_study(cfg, result, base, q)
        result.wall_time = time.perf_counter() - t_start
        return result

    ref_cfg = cfg.study.reference
    ks = reference_run(cfg, base, q, ref_cfg.refine_x, ref_cfg.refine_t)
    result.warnings.extend(ks.warnings)
    epsilons = cfg.epsilons()
    members = _map_members(cfg, epsilons, ks, jobs)
    result.rows = [row for row, _ in members]
    for row, traj in members:
        if traj is not None:
            result.snapshots.extend(_snapshot_rows(row.epsilon, traj, ks, base.mesh))

    if cfg.study.kind == "epsilon_sweep":
        _fit_and_gate(result, result.rows)
        first_row, first_traj = members[0]
        if ref_cfg.check and ref_cfg.refine_x >= 2 and first_traj is not None:
            half_x = ref_cfg.refine_x // 2
            half_t = max(1, ref_cfg.refine_t // 4)
            ks_half = reference_run(cfg, base, q, half_x, half_t)
            e_half = decompose_remainders(first_traj, ks_half, base.with_epsilon(first_row.epsilon), q).combined_error
            change = abs(e_half - first_row.err_combined) / first_row.err_combined
            limit = cfg.study.gates.reference_change_max
            result.reference = {"epsilon": first_row.epsilon, "error_full": first_row.err_combined,
                                "error_half": e_half, "relative_change": change}
            result.gates["reference_stability"] = _gate(change, 0.0, limit)
    result.wall_time = time.perf_counter() - t_start
    return result


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(map(str, v))
    if v is None:
        return ""
    return str(v)


def _write_csv(path, columns, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def manifest(result: StudyResult, status: str = "completed", exit_code: int | None = None) -> dict:
    runs = []
    for r in result.rows:
        d = asdict(r)
        runs.append({k: d[k] for k in ("epsilon", "iters_max", "cap_hits", "direct_steps",
                                       "vbar_u1_residual", "phibar_residual", "warnings", "error")})
    return {
        "tool": "chemoslab",
        "version": __version__,
        "status": status,
        "exit_code": exit_code,
        "study": result.kind,
        "epsilons": result.config.epsilons(),
        "config": result.config.model_dump(mode="json"),
        "wall_time_seconds": result.wall_time,
        "compatibility": result.compatibility,
        "reference_check": result.reference,
        "fits": {k: asdict(v) for k, v in result.fits.items()},
        "gates": result.gates,
        "runs": runs,
        "failures": result.failures,
        "warnings": result.warnings,
    }


def write_manifest(data: dict, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "manifest.json")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, sort_keys=False, allow_nan=True, default=float)
            fh.write("\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
    return path


def write_outputs(result: StudyResult, out_dir, exit_code: int | None = None) -> list[str]:
    """Write rates.csv, bounds.csv, snapshots.csv, fits.csv, manifest.json.

    mesh_refinement studies also get refinement.csv. Floats use the
    shortest round-trip representation.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {out_dir}: {exc.strerror}") from None
    paths = []

    def target(name):
        p = os.path.join(out_dir, name)
        paths.append(p)
        return p

    _write_csv(target("rates.csv"), RATES_COLUMNS,
               [(r.epsilon, r.err_combined, r.err_b, r.err_c, r.iters_max,
                 r.warnings + ([f"error: {r.error}"] if r.error else [])) for r in result.rows])
    _write_csv(target("bounds.csv"), BOUNDS_COLUMNS,
               [(r.epsilon,) + tuple(r.bounds.get(k, math.nan) for k in BOUND_NAMES) for r in result.rows])
    _write_csv(target("snapshots.csv"), SNAPSHOT_COLUMNS, result.snapshots)
    fit_rows = []
    for name, fit in result.fits.items():
        g = result.gates.get(f"slope_{name}", {})
        fit_rows.append((name, fit.slope, fit.intercept, fit.r_squared, g.get("lo"), g.get("hi"), g.get("passed")))
    _write_csv(target("fits.csv"), FIT_COLUMNS, fit_rows)
    if result.kind == "mesh_refinement":
        _write_csv(target("refinement.csv"), REFINEMENT_COLUMNS, result.refinement)
    paths.append(write_manifest(manifest(result, exit_code=exit_code), out_dir))
    return paths
