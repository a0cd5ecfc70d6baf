import numpy as np
import pytest
from scipy.optimize import brentq

from nonlocal_logistic import (
    ConvergenceError,
    DiscreteOperator,
    Domain,
    KernelSpec,
    NoSteadyStateError,
    StabilityError,
    build_grid,
    cosine_resource,
    energy,
    evolve,
    from_values,
    random_resource,
    residual,
    solve_fixed_point,
    stable_time_step,
)


def two_cell():
    g = build_grid(Domain.interval(0, 1), 2)
    return DiscreteOperator(g, KernelSpec.uniform(1.0)), from_values(g, [2.0, 0.0])


def cubic_oracle():
    # the ratio s = theta_2 / theta_1 solves s^3 + 7 s^2 + s - 1 = 0; then theta_2 = (1/s - 1)/4
    s = brentq(lambda t: t**3 + 7 * t**2 + t - 1, 0.0, 1.0, xtol=1e-15)
    t2 = (1.0 / s - 1.0) / 4.0
    return np.array([t2 / s, t2])


def test_two_cell_against_cubic_root():
    op, m = two_cell()
    st = solve_fixed_point(op, m, 1.0, tol=1e-13)
    assert np.allclose(st.theta, cubic_oracle(), atol=1e-10)
    assert st.total_population == pytest.approx(0.5 * cubic_oracle().sum(), abs=1e-10)
    assert st.residual < 1e-11


@pytest.mark.parametrize("backend", ["dense", "matfree", "fft"])
def test_backends_give_same_steady_state(backend):
    g = build_grid(Domain.interval(0, 1), 96)
    op = DiscreteOperator(g, KernelSpec.uniform(0.1), backend=backend)
    m = cosine_resource(g)
    ref = solve_fixed_point(op.with_backend("dense"), m, 2.0, tol=1e-12)
    st = solve_fixed_point(op, m, 2.0, tol=1e-12)
    assert np.max(np.abs(st.theta - ref.theta)) < 1e-10


def test_matches_time_stepping(rng):
    g = build_grid(Domain.interval(0, 1), 40)
    op = DiscreteOperator(g, KernelSpec.tent(0.2))
    m = random_resource(g, rng)
    st = solve_fixed_point(op, m, 1.0, tol=1e-12)
    tr = evolve(op, m, 1.0, 0.5, 0.9 * stable_time_step(op, m, 1.0), 2000.0, steady_tol=1e-12)
    assert tr.stopped_early
    assert np.max(np.abs(tr.final - st.theta)) < 1e-9


def test_2d_disk_steady_state(rng):
    g = build_grid(Domain.disk((0, 0), 1.0), 24)
    op = DiscreteOperator(g, KernelSpec.truncated_gaussian(0.2, dim=2))
    m = random_resource(g, rng)
    st = solve_fixed_point(op, m, 1.0)
    assert st.relative_residual < 1e-9
    assert st.total_population > m.total


def test_no_steady_state_for_dirichlet_weak_resource():
    g = build_grid(Domain.interval(0, 1), 32)
    op = DiscreteOperator(g, KernelSpec.uniform(0.2), boundary="dirichlet")
    m = from_values(g, np.full(32, 0.01) + np.linspace(0, 0.001, 32))
    with pytest.raises(NoSteadyStateError) as info:
        solve_fixed_point(op, m, 10.0)
    assert info.value.mu0 < 0


def test_iteration_budget_carries_state():
    g = build_grid(Domain.interval(0, 1), 32)
    op = DiscreteOperator(g, KernelSpec.uniform(0.2))
    with pytest.raises(ConvergenceError) as info:
        solve_fixed_point(op, cosine_resource(g), 1.0, max_iter=2)
    assert info.value.result.iterations == 2 and not info.value.result.converged


def test_bad_inputs():
    op, m = two_cell()
    with pytest.raises(ValueError):
        solve_fixed_point(op, m, 0.0)
    with pytest.raises(StabilityError):
        evolve(op, m, 1.0, 1.0, 2 * stable_time_step(op, m, 1.0), 1.0)
    with pytest.raises(StabilityError):
        evolve(op, m, 1.0, -1.0, 0.01, 1.0)


def test_energy_increases_along_flow(rng):
    g = build_grid(Domain.interval(0, 1), 32)
    op = DiscreteOperator(g, KernelSpec.uniform(0.15))
    m = random_resource(g, rng)
    tr = evolve(op, m, 2.0, 0.01, 0.5 * stable_time_step(op, m, 2.0), 20.0)
    e = np.array([energy(op, m, 2.0, u).value for u in tr.snapshots])
    assert np.all(np.diff(e) >= -1e-12)


def test_residual_is_small_at_solution():
    g = build_grid(Domain.interval(0, 1), 64)
    op = DiscreteOperator(g, KernelSpec.uniform(0.1))
    m = cosine_resource(g)
    st = solve_fixed_point(op, m, 0.5, tol=1e-12)
    assert residual(op, m, 0.5, st.theta) == pytest.approx(st.residual)
    assert st.residual < 1e-10
    assert st.rate is not None and 0 <= st.rate < 1
