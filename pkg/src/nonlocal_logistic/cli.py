"""Command-line entry point: ``nonlocal-logistic <command> --config run.json``.

Exit codes: 0 success, 1 a check failed, 2 config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    BangBangFamily,
    criterion_A,
    level_set_diagnostics,
    operator_bound_constants,
    sweep,
)
from .config import ExperimentConfig
from .errors import ConfigError, NonlocalError
from .grid import Domain, build_grid
from .kernel import DiscreteOperator, KernelSpec, operator_selfcheck
from .resources import FamilySpec, from_values, random_resource, validate_M1
from .spectral import energy, principal_value
from .steady import evolve, solve_fixed_point, stable_time_step

log = logging.getLogger("nonlocal_logistic")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("solve", "mu0", "sweep", "criterion", "bounds", "examples", "selftest")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _family(cfg: ExperimentConfig) -> BangBangFamily:
    return BangBangFamily(
        cfg.domain,
        cfg.kernel,
        cfg.family,
        cells=cfg.cells,
        min_cells=cfg.min_cells,
        min_support_cells=cfg.min_support_cells,
        backend=cfg.backend,
        boundary=cfg.boundary,
    )


def _require_d(cfg: ExperimentConfig) -> float:
    if cfg.d is None:
        raise ConfigError("d: this command needs a single positive d")
    return cfg.d


def _coords(grid) -> tuple[list[str], np.ndarray]:
    names = ["x"] if grid.dim == 1 else ["x", "y"]
    return names, grid.centers


# -- commands ----------------------------------------------------------------------


def cmd_solve(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[dict, list[dict]]:
    d = _require_d(cfg)
    op, m = _family(cfg)(d)
    state = solve_fixed_point(op, m, d, tol=cfg.tol, max_iter=cfg.max_iter)
    names, xy = _coords(op.grid)
    _write_csv(
        out / "theta.csv",
        names + ["theta", "m"],
        ([*p, t, mv] for p, t, mv in zip(xy, state.theta, m.field)),
    )
    scale = max(1.0, float(np.max(state.theta)))
    checks = [
        {"name": "residual_within_tol", "passed": state.relative_residual <= 10 * cfg.tol},
        {
            "name": "theta_bounded_by_sup_m",
            "passed": bool(np.max(state.theta) <= m.sup_norm + 10 * cfg.tol * scale),
        },
        {"name": "theta_positive", "passed": bool(np.min(state.theta) > 0)},
    ]
    if op.boundary == "neumann" and not m.is_constant:
        checks.append({"name": "population_exceeds_resource", "passed": state.total_population > m.total})
    result = {
        "steady_state": state.to_dict(),
        "resource": {"total": m.total, "sup_norm": m.sup_norm, "M1": validate_M1(m).to_dict()},
        "grid": {"cells": op.grid.n_cells, "h": op.grid.h, "backend": op.backend},
        "csv_columns": {"theta.csv": names + ["theta", "m"]},
    }
    return result, checks


def cmd_mu0(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[dict, list[dict]]:
    d = _require_d(cfg)
    op, m = _family(cfg)(d)
    pv = principal_value(op, m, d, tol=min(cfg.tol, 1e-12))
    names, xy = _coords(op.grid)
    _write_csv(out / "eigenfield.csv", names + ["psi"], ([*p, v] for p, v in zip(xy, pv.eigenfield)))
    result = {
        "mu0": pv.mu0,
        "refinement": _mu0_refinement(cfg, op, d, pv.mu0),
        "iterations": pv.iterations,
        "residual": pv.residual,
        "shift": pv.shift,
        "positive_steady_state_exists": pv.mu0 > 0,
        "csv_columns": {"eigenfield.csv": names + ["psi"]},
    }
    return result, [{"name": "mu0_finite", "passed": math.isfinite(pv.mu0)}]


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[dict, list[dict]]:
    grid_d = cfg.d_values()
    if len(grid_d) < 2:
        raise ConfigError("d_grid: sweep needs at least two values")
    fam = _family(cfg)
    res = sweep(fam, grid_d, tol=cfg.tol, max_iter=cfg.max_iter, threads=threads, epsilon_grid=cfg.epsilon_grid)
    _write_csv(
        out / "sweep.csv",
        ["d", "total", "total_over_sqrt_d", "residual"],
        ([s.d, s.total, s.total_over_sqrt_d, s.residual] for s in res.samples),
    )
    if not res.complete:
        raise _SolverFailure(res.error, res.to_dict())
    op_last, m_last = fam(grid_d[-1])
    constants = operator_bound_constants(op_last, m_last.total).to_dict()
    checks = [
        {"name": "upper_bound_C1_sqrt_d", "passed": res.upper_bound_ok},
        {"name": "population_exceeds_resource", "passed": res.population_excess_ok},
        {"name": "residuals_within_tol", "passed": all(s.relative_residual <= 10 * cfg.tol for s in res.samples)},
    ]
    summary = res.to_dict()
    summary["constants"] = constants
    summary["csv_columns"] = {"sweep.csv": ["d", "total", "total_over_sqrt_d", "residual"]}
    return summary, checks


def _mu0_refinement(cfg: ExperimentConfig, op, d: float, mu0: float) -> dict:
    """``mu0`` on a grid with half the cells per axis; the gap is reported, not judged."""
    coarse_cells = max(2, op.grid.shape[0] // 2)
    coarse = BangBangFamily(
        cfg.domain, cfg.kernel, cfg.family, cells=coarse_cells, backend="auto", boundary=cfg.boundary
    )
    try:
        op_c, m_c = coarse(d)
        mu_c = principal_value(op_c, m_c, d, tol=min(cfg.tol, 1e-12)).mu0
    except (NonlocalError, ValueError) as exc:
        return {"coarse_cells_per_axis": coarse_cells, "skipped": str(exc)}
    return {"coarse_cells_per_axis": coarse_cells, "coarse_mu0": mu_c, "delta": mu0 - mu_c}


def cmd_criterion(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[dict, list[dict]]:
    values = cfg.d_values()
    if not values:
        raise ConfigError("d: criterion needs d or d_grid")
    fam = _family(cfg)
    reports, rows = [], []
    for d in values:
        op, m = fam(d)
        rep = criterion_A(m, d, op.a, cfg.epsilon_grid)
        reports.append(rep.to_dict())
        rows.extend((d, e, ms, me) for e, ms, me in zip(rep.epsilon_grid, rep.masses, rep.level_set_measures))
    _write_csv(out / "criterion.csv", ["d", "epsilon", "mass", "level_set_measure"], rows)
    feasible = all(r["feasible"] for r in reports)
    result = {
        "reports": reports,
        "feasible_for_all_d": feasible,
        "min_max_feasible_epsilon": min((r["max_feasible_epsilon"] or 0.0) for r in reports),
        "csv_columns": {"criterion.csv": ["d", "epsilon", "mass", "level_set_measure"]},
    }
    monotone = all(np.all(np.diff(r["masses"]) <= 0) for r in reports)
    return result, [{"name": "mass_nonincreasing_in_epsilon", "passed": bool(monotone)}]


def cmd_bounds(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[dict, list[dict]]:
    fam = _family(cfg)
    values = cfg.d_values()
    op, m = fam(values[-1] if values else 1.0)
    consts = operator_bound_constants(op, m.total)
    result = {"constants": consts.to_dict(), "level_sets": []}
    checks = []
    for d in values:
        op, m = fam(d)
        state = solve_fixed_point(op, m, d, tol=cfg.tol, max_iter=cfg.max_iter)
        c = operator_bound_constants(op, m.total)
        rep = level_set_diagnostics(state.theta, m, d, op.a, c)
        entry = rep.to_dict()
        entry["total"] = state.total_population
        entry["C1_sqrt_d"] = c.upper_bound(d)
        result["level_sets"].append(entry)
        checks.append({"name": f"level_sets_d={d:g}", "passed": rep.passed})
        if d >= 1:
            checks.append({"name": f"upper_bound_d={d:g}", "passed": state.total_population <= c.upper_bound(d)})
    return result, checks


# -- examples ------------------------------------------------------------------------


def _example_scenarios():
    unit = Domain.interval(0.0, 1.0)
    uniform = KernelSpec.uniform(0.05)
    ring_dom = Domain.interval(-1.0, 1.0)
    ring = KernelSpec.ring(0.1, 0.6)
    return [
        (
            "example1",
            [
                ("beta=1.5", unit, uniform, FamilySpec("example1", {"alpha": 1.0, "beta": 1.5}), True),
                ("beta=0.5", unit, uniform, FamilySpec("example1", {"alpha": 1.0, "beta": 0.5}), False),
                ("beta=1,alpha=1.5>max a", unit, uniform, FamilySpec("example1", {"alpha": 1.5, "beta": 1.0}), True),
                ("beta=1,alpha=0.4<=min a", unit, uniform, FamilySpec("example1", {"alpha": 0.4, "beta": 1.0}), False),
            ],
        ),
        (
            "example2",
            [
                ("near_boundary", unit, uniform, FamilySpec("example2", {"x0": "near_boundary"}), True),
                ("interior", unit, uniform, FamilySpec("example2", {"x0": "interior"}), False),
            ],
        ),
        (
            "example3",
            [
                ("center", ring_dom, ring, FamilySpec("example3", {"alpha_hat": 0.3, "x0": "interior"}), True),
                ("near_boundary", ring_dom, ring, FamilySpec("example3", {"alpha_hat": 0.3, "x0": "near_boundary"}), False),
            ],
        ),
    ]


def cmd_examples(cfg: ExperimentConfig | None, out: Path, threads: int) -> tuple[dict, list[dict]]:
    opts = cfg.examples if cfg is not None else {}
    d_lo, d_hi = float(opts.get("d_min", 100.0)), float(opts.get("d_max", 400.0))
    n_d = int(opts.get("num", 4))
    run_sweeps = bool(opts.get("sweep", True))
    tol = cfg.tol if cfg is not None else 1e-10
    d_grid = np.geomspace(d_lo, d_hi, n_d)
    scenarios, checks, rows = {}, [], []
    for name, cases in _example_scenarios():
        entries = []
        for label, dom, ker, fam_spec, expect in cases:
            fam = BangBangFamily(dom, ker, fam_spec)
            eps = [criterion_A(m, d, op.a).max_feasible_epsilon for d in d_grid for op, m in [fam(d)]]
            feasible = all(e is not None for e in eps)
            entry = {
                "case": label,
                "family": fam_spec.to_dict(),
                "criterion_A": "feasible" if feasible else "infeasible",
                "expected": "feasible" if expect else "infeasible",
                "max_feasible_epsilon": eps,
            }
            checks.append({"name": f"{name}:{label}:criterion_A", "passed": feasible == expect})
            if run_sweeps:
                res = sweep(fam, d_grid, tol=tol, threads=threads)
                entry["sweep"] = res.to_dict()
                if expect:
                    ok = res.complete and res.fit is not None and res.fit.exponent >= 0.4
                    checks.append({"name": f"{name}:{label}:exponent>=0.4", "passed": bool(ok)})
                else:
                    ok = res.complete and res.ratio_decreasing
                    checks.append({"name": f"{name}:{label}:total/sqrt(d)_decreasing", "passed": bool(ok)})
                rows.extend((name, label, s.d, s.total, s.total_over_sqrt_d) for s in res.samples)
            entries.append(entry)
        scenarios[name] = entries
    if rows:
        _write_csv(out / "examples.csv", ["scenario", "case", "d", "total", "total_over_sqrt_d"], rows)
    return {"d_grid": d_grid, "scenarios": scenarios}, checks


# -- selftest ---------------------------------------------------------------------------


def cmd_selftest(cfg: ExperimentConfig | None, out: Path, threads: int) -> tuple[dict, list[dict]]:
    seed = cfg.seed if cfg is not None else 0
    rng = np.random.default_rng(seed)
    checks: list[dict] = []
    result: dict = {}

    grid = build_grid(Domain.interval(0.0, 1.0), 32)
    op = DiscreteOperator(grid, KernelSpec.uniform(0.25))
    rep = operator_selfcheck(op, seed=seed)
    result["operator_selfcheck"] = rep.to_dict()
    checks.append({"name": "operator_identities", "passed": rep.passed(1e-10, 1e-10)})
    dirichlet = op.with_boundary("dirichlet")
    L1 = dirichlet.apply(np.ones(grid.n_cells))
    checks.append({"name": "dirichlet_L1_nonpositive", "passed": bool(np.all(L1 <= 1e-15))})

    g2 = build_grid(Domain.interval(0.0, 1.0), 2)
    op2 = DiscreteOperator(g2, KernelSpec.uniform(1.0))
    m2 = from_values(g2, [2.0, 0.0])
    s2 = solve_fixed_point(op2, m2, 1.0, tol=1e-12)
    mu2 = principal_value(op2, m2, 1.0).mu0
    result["two_cell"] = {"theta": s2.theta, "total": s2.total_population, "mu0": mu2}
    checks.append(
        {
            "name": "two_cell_pinned",
            "passed": bool(
                np.allclose(s2.theta, [1.8270, 0.5623], atol=1e-3)
                and abs(mu2 - (0.75 + math.sqrt(1.0625))) < 1e-5
            ),
        }
    )

    gaps, energies = [], []
    for k in range(3):
        m = random_resource(grid, rng)
        for d in (0.1, 1.0, 10.0):
            st = solve_fixed_point(op, m, d, tol=1e-12)
            dt = 0.5 * stable_time_step(op, m, d)
            tr = evolve(op, m, d, 1e-3, dt, 400.0, steady_tol=1e-13)
            gaps.append(float(np.max(np.abs(tr.final - st.theta))))
            checks.append({"name": f"comparison_bound[{k},{d:g}]", "passed": bool(st.theta.max() <= m.sup_norm + 1e-9)})
            checks.append({"name": f"population_excess[{k},{d:g}]", "passed": st.total_population > m.total})
        tr = evolve(op, m, 1.0, m.sup_norm, 0.5 * stable_time_step(op, m, 1.0), 20.0)
        e = [energy(op, m, 1.0, u).value for u in tr.snapshots]
        energies.append(float(np.min(np.diff(e))))
    result["oracle_max_gap"] = max(gaps)
    result["energy_min_increment"] = min(energies)
    checks.append({"name": "fixed_point_matches_evolve", "passed": max(gaps) <= 1e-6})
    checks.append({"name": "energy_nondecreasing", "passed": min(energies) >= -1e-8})
    return result, checks


# -- dispatch -----------------------------------------------------------------------------


class _SolverFailure(NonlocalError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


HANDLERS = {
    "solve": cmd_solve,
    "mu0": cmd_mu0,
    "sweep": cmd_sweep,
    "criterion": cmd_criterion,
    "bounds": cmd_bounds,
    "examples": cmd_examples,
    "selftest": cmd_selftest,
}


def run(command: str, cfg: ExperimentConfig | None, out: Path, threads: int = 1) -> int:
    """Run one command, write ``config.json``/``report.json`` into ``out``, return the exit code."""
    out.mkdir(parents=True, exist_ok=True)
    if cfg is not None:
        (out / "config.json").write_text(cfg.to_json() + "\n")
    report = {"command": command, "version": __version__, "config": cfg.to_dict() if cfg else None}
    t0 = time.perf_counter()
    try:
        result, checks = HANDLERS[command](cfg, out, threads)
        code = EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK
    except ConfigError as exc:
        report.update(status="config_error", errors=exc.errors)
        _write_json(out / "report.json", report)
        return EXIT_CONFIG
    except (NonlocalError, ArithmeticError) as exc:
        report.update(status="solver_failure", error=f"{type(exc).__name__}: {exc}")
        if getattr(exc, "partial", None) is not None:
            report["partial"] = exc.partial
        _write_json(out / "report.json", report)
        return EXIT_SOLVER
    except ValueError as exc:
        # a parameter combination the modules reject, e.g. a spike that does not fit
        report.update(status="config_error", errors=[f"{command}: {exc}"])
        _write_json(out / "report.json", report)
        return EXIT_CONFIG
    report.update(
        status="ok" if code == EXIT_OK else "check_failed",
        result=result,
        checks=checks,
        failed_checks=[c["name"] for c in checks if not c["passed"]],
    )
    _write_json(out / "report.json", report)
    # timings are kept apart so report.json is byte-reproducible
    _write_json(out / "timings.json", {"command": command, "wall_seconds": time.perf_counter() - t0})
    return code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="nonlocal-logistic", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="experiment config (JSON)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="sweep workers (env NLD_THREADS)")
    parser.add_argument("--verbose", "-v", action="count", default=0)
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    threads = args.threads or int(os.environ.get("NLD_THREADS", "1") or 1)

    cfg = None
    if args.config is not None:
        try:
            cfg = ExperimentConfig.load(args.config)
        except ConfigError as exc:
            print(json.dumps({"status": "config_error", "errors": exc.errors}, indent=2), file=sys.stderr)
            return EXIT_CONFIG
    elif args.command not in ("examples", "selftest"):
        print(json.dumps({"status": "config_error", "errors": ["--config is required"]}), file=sys.stderr)
        return EXIT_CONFIG

    out = args.out or Path((cfg and cfg.output_dir) or f"runs/{args.command}")
    code = run(args.command, cfg, out, threads)
    status = json.loads((out / "report.json").read_text()).get("status")
    print(f"{args.command}: {status} (exit {code}) -> {out}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
