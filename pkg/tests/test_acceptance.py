"""Acceptance criteria 1-10.  Each test prints one ``PASS``/``FAIL`` line (run with ``-s`` to see them)."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from nonlocal_logistic import (
    BangBangFamily,
    DiscreteOperator,
    Domain,
    FamilySpec,
    KernelSpec,
    bound_constants,
    build_grid,
    cosine_resource,
    energy,
    evolve,
    from_values,
    level_set_diagnostics,
    operator_bound_constants,
    operator_selfcheck,
    principal_value,
    random_resource,
    solve_fixed_point,
    stable_time_step,
    sweep,
    validate_M1,
)

# tolerances as stated by the acceptance criteria
IDENTITY_TOL = 1e-12
BACKEND_TOL = 1e-10
PINNED_THETA = (1.8270, 0.5623)
PINNED_THETA_TOL = 1e-3
PINNED_TOTAL = 1.1946
PINNED_MU0_TOL = 1e-5
RESIDUAL_TOL = 1e-9
ORACLE_GAP_TOL = 1e-6
SUP_SLACK = 1e-9
ENERGY_TOL = 1e-8
EXPONENT_RANGE = (0.4, 0.6)
R2_MIN = 0.95
RATIO_DROP = 0.5
LEVEL_SET_SLACK = 0.1
LIMIT_TOL = 0.10
MINUTES = 600.0  # "runtime minutes" read as a ten-minute ceiling

SWEEP_D = np.geomspace(100.0, 1000.0, 8)
GEOMETRY_D = np.geomspace(100.0, 1000.0, 6)


def verdict(criterion: str, passed: bool, detail: str) -> None:
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    assert passed, detail


# -- shared runs ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def existence_runs():
    """Criterion 3 runs, reused by criterion 4."""
    t0 = time.perf_counter()
    g = build_grid(Domain.interval(0.0, 1.0), 64)
    op = DiscreteOperator(g, KernelSpec.uniform(0.1))
    rng = np.random.default_rng(2024)
    runs = []
    for _ in range(10):
        m = random_resource(g, rng)
        for d in (0.1, 1.0, 10.0):
            mu0 = principal_value(op, m, d).mu0
            st = solve_fixed_point(op, m, d, tol=1e-12)
            dt = 0.9 * stable_time_step(op, m, d)
            hi = evolve(op, m, d, m.sup_norm, dt, 1e5, steady_tol=1e-12)
            lo = evolve(op, m, d, 1e-3, dt, 1e5, steady_tol=1e-12)
            runs.append(
                {
                    "m": m,
                    "d": d,
                    "mu0": mu0,
                    "state": st,
                    "gap": max(np.max(np.abs(hi.final - st.theta)), np.max(np.abs(lo.final - st.theta))),
                    "m1": validate_M1(m).passed,
                }
            )
    return runs, time.perf_counter() - t0


def _family(kernel, domain, spec):
    return BangBangFamily(domain, kernel, spec)


@pytest.fixture(scope="module")
def example1_sweeps():
    unit = Domain.interval(0.0, 1.0)
    k = KernelSpec.uniform(0.05)
    out = {}
    for beta in (1.5, 0.5):
        t0 = time.perf_counter()
        res = sweep(_family(k, unit, FamilySpec("example1", {"alpha": 1.0, "beta": beta})), SWEEP_D)
        out[beta] = (res, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def geometry_sweeps():
    unit = Domain.interval(0.0, 1.0)
    sym = Domain.interval(-1.0, 1.0)
    uniform = KernelSpec.uniform(0.05)
    ring = KernelSpec.ring(0.1, 0.6)
    cases = {
        "uniform near_boundary": (uniform, unit, FamilySpec("example2", {"x0": "near_boundary"}), True),
        "uniform interior": (uniform, unit, FamilySpec("example2", {"x0": "interior"}), False),
        "ring center": (ring, sym, FamilySpec("example3", {"alpha_hat": 0.3, "x0": "interior"}), True),
        "ring near_boundary": (ring, sym, FamilySpec("example3", {"alpha_hat": 0.3, "x0": "near_boundary"}), False),
    }
    t0 = time.perf_counter()
    out = {name: (sweep(_family(k, dom, fam), GEOMETRY_D), expect) for name, (k, dom, fam, expect) in cases.items()}
    return out, time.perf_counter() - t0


# -- criteria ---------------------------------------------------------------------------


def test_criterion_01_discrete_identities():
    t0 = time.perf_counter()
    g = build_grid(Domain.interval(0.0, 1.0), 64)
    op = DiscreteOperator(g, KernelSpec.uniform(0.1))
    rep = operator_selfcheck(op, n_fields=10, seed=7)
    elapsed = time.perf_counter() - t0
    ok = (
        rep.conservation <= IDENTITY_TOL
        and rep.dissipation <= IDENTITY_TOL
        and rep.backend_gap <= BACKEND_TOL
        and set(rep.backends) == {"dense", "matfree", "fft"}
        and elapsed < 1.0
    )
    verdict(
        "1",
        ok,
        f"conservation {rep.conservation:.2e}, dissipation {rep.dissipation:.2e}, "
        f"backend gap {rep.backend_gap:.2e} over {rep.backends}, {elapsed:.3f}s",
    )


def test_criterion_02_pinned_instance():
    t0 = time.perf_counter()
    g = build_grid(Domain.interval(0.0, 1.0), 2)
    op = DiscreteOperator(g, KernelSpec.uniform(1.0))
    m = from_values(g, [2.0, 0.0])
    st = solve_fixed_point(op, m, 1.0, tol=1e-12)
    mu0 = principal_value(op, m, 1.0).mu0
    elapsed = time.perf_counter() - t0

    # independent oracles: ratio s = theta_2/theta_1 is the root of s^3 + 7 s^2 + s - 1 in (0, 1),
    # and the 2x2 matrix dL + diag(m) is [[7/4, 1/4], [1/4, -1/4]]
    s = brentq(lambda t: t**3 + 7 * t**2 + t - 1, 0.0, 1.0, xtol=1e-15)
    t2 = (1 / s - 1) / 4
    oracle = np.array([t2 / s, t2])
    mu0_exact = 0.75 + math.sqrt(1.0625)

    ok = (
        np.allclose(st.theta, PINNED_THETA, atol=PINNED_THETA_TOL)
        and np.allclose(st.theta, oracle, atol=PINNED_THETA_TOL)
        and abs(st.total_population - PINNED_TOTAL) <= PINNED_THETA_TOL
        and st.total_population > 1.0
        and abs(mu0 - mu0_exact) <= PINNED_MU0_TOL
        and abs(mu0 - 1.78078) <= PINNED_MU0_TOL
        and elapsed < 1.0
    )
    verdict(
        "2",
        ok,
        f"theta {st.theta.round(6).tolist()} (oracle {oracle.round(6).tolist()}), "
        f"total {st.total_population:.6f}, mu0 {mu0:.7f} (exact {mu0_exact:.7f}), {elapsed:.3f}s",
    )


def test_criterion_03_existence_uniqueness(existence_runs):
    runs, elapsed = existence_runs
    mu_ok = all(r["mu0"] > 0 for r in runs)
    res = max(r["state"].residual for r in runs)
    gap = max(r["gap"] for r in runs)
    m1 = all(r["m1"] for r in runs)
    ok = mu_ok and m1 and res <= RESIDUAL_TOL and gap <= ORACLE_GAP_TOL and elapsed < 30.0
    verdict(
        "3",
        ok,
        f"{len(runs)} runs, min mu0 {min(r['mu0'] for r in runs):.4f}, max residual {res:.2e}, "
        f"max oracle gap {gap:.2e}, {elapsed:.1f}s",
    )


def test_criterion_04_comparison_bounds(existence_runs):
    runs, _ = existence_runs
    sup_excess = max(r["state"].theta.max() - r["m"].sup_norm for r in runs)
    pop_margin = min(r["state"].total_population - r["m"].total for r in runs)
    ok = sup_excess <= SUP_SLACK and pop_margin > 0
    verdict("4", ok, f"max(theta) - sup m <= {sup_excess:.3e}; min(total theta - total m) = {pop_margin:.3e}")


def test_criterion_05_energy_monotone():
    g = build_grid(Domain.interval(0.0, 1.0), 64)
    op = DiscreteOperator(g, KernelSpec.uniform(0.1))
    rng = np.random.default_rng(5)
    worst = math.inf
    for k, (d, u0) in enumerate([(0.1, 1e-3), (1.0, 1e-3), (10.0, 1e-3), (1.0, None), (3.0, 0.5)]):
        m = random_resource(g, rng)
        start = m.sup_norm if u0 is None else u0
        tr = evolve(op, m, d, start, 0.5 * stable_time_step(op, m, d), 30.0, snapshot_every=5)
        e = np.array([energy(op, m, d, u).value for u in tr.snapshots])
        worst = min(worst, float(np.min(np.diff(e))))
    verdict("5", worst >= -ENERGY_TOL, f"smallest energy increment between snapshots {worst:.3e}")


def test_criterion_06_sqrt_law_feasible(example1_sweeps):
    res, elapsed = example1_sweeps[1.5]
    fit = res.fit
    ok = (
        res.complete
        and EXPONENT_RANGE[0] <= fit.exponent <= EXPONENT_RANGE[1]
        and fit.r2 >= R2_MIN
        and res.criterion_feasible
        and elapsed < MINUTES
    )
    cells = [s.n_cells for s in res.samples]
    verdict(
        "6",
        ok,
        f"exponent {fit.exponent:.4f}, R^2 {fit.r2:.6f} over d in [{res.d[0]:g}, {res.d[-1]:g}], "
        f"cells {cells[0]}..{cells[-1]}, {elapsed:.1f}s",
    )


def test_criterion_07_sub_sqrt_infeasible(example1_sweeps):
    res, _ = example1_sweeps[0.5]
    r = res.ratios
    ok = res.complete and res.ratio_decreasing and r[-1] / r[0] <= RATIO_DROP
    verdict("7", ok, f"total/sqrt(d) {r[0]:.4f} -> {r[-1]:.4f} (ratio {r[-1] / r[0]:.3f}), strictly decreasing {res.ratio_decreasing}")


def test_criterion_08_upper_bound_constants(example1_sweeps, geometry_sweeps):
    c = bound_constants(1.0, 1.0, 0.5, 0.5)
    pinned = (
        abs(c.K1 - 1) < 1e-12 and abs(c.K2 - 9) < 1e-12 and abs(c.K3 - 38) < 1e-12 and abs(c.C1 - 14.329) < 1e-3
    )
    sweeps = [s for s, _ in example1_sweeps.values()] + [s for s, _ in geometry_sweeps[0].values()]
    worst = max(smp.total / smp.upper_bound for s in sweeps for smp in s.samples if smp.d >= 1)

    # level sets for the feasible Example-1 member at the ends of its grid
    fam = BangBangFamily(Domain.interval(0.0, 1.0), KernelSpec.uniform(0.05), FamilySpec("example1", {"alpha": 1.0, "beta": 1.5}))
    ls_ok, worst_o2 = True, 0.0
    for d in (SWEEP_D[0], SWEEP_D[-1]):
        op, m = fam(d)
        st = solve_fixed_point(op, m, d)
        rep = level_set_diagnostics(st.theta, m, d, op.a, operator_bound_constants(op, m.total), slack=LEVEL_SET_SLACK)
        ls_ok &= rep.omega2_within_bound and rep.omega2_inclusion_violations == 0
        worst_o2 = max(worst_o2, rep.omega2_measure / rep.omega2_bound)
    ok = pinned and worst <= 1.0 and ls_ok
    verdict(
        "8",
        ok,
        f"K1={c.K1:g} K2={c.K2:g} K3={c.K3:g} C1={c.C1:.4f}; max total/(C1 sqrt d) {worst:.3e}; "
        f"max |Omega2|/bound {worst_o2:.3f}",
    )


def test_criterion_09_criterion_A_geometry(geometry_sweeps):
    results, elapsed = geometry_sweeps
    parts, ok = [], elapsed < MINUTES
    for name, (res, expect) in results.items():
        tagged = res.criterion_feasible
        if expect:
            good = res.complete and tagged and res.fit.exponent >= EXPONENT_RANGE[0]
            parts.append(f"{name}: feasible={tagged}, exponent {res.fit.exponent:.3f}")
        else:
            good = res.complete and not tagged and res.ratio_decreasing
            parts.append(f"{name}: feasible={tagged}, total/sqrt(d) decreasing {res.ratio_decreasing}")
        ok &= good
    verdict("9", ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_10_limits():
    g = build_grid(Domain.interval(0.0, 1.0), 64)
    op = DiscreteOperator(g, KernelSpec.uniform(0.1))
    m = cosine_resource(g)
    totals = {d: solve_fixed_point(op, m, d, tol=1e-10, max_iter=500_000).total_population for d in (1e-3, 0.1, 1.0, 10.0, 100.0, 1e4)}
    small, large = totals[1e-3], totals[1e4]
    inner = max(v for d, v in totals.items() if d not in (1e-3, 1e4))
    ok = abs(small - 1) <= LIMIT_TOL and abs(large - 1) <= LIMIT_TOL and inner > max(small, large)
    detail = ", ".join(f"d={d:g}: {v:.5f}" for d, v in totals.items())
    verdict("10", ok, detail)
