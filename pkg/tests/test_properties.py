"""Randomised invariants of the discrete operator and the steady state."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nonlocal_logistic import (
    DiscreteOperator,
    Domain,
    KernelSpec,
    build_grid,
    evolve,
    from_values,
    integrate,
    solve_fixed_point,
    stable_time_step,
)

N = 24
GRID = build_grid(Domain.interval(0.0, 1.0), N)
OPS = {
    name: DiscreteOperator(GRID, k)
    for name, k in {
        "uniform": KernelSpec.uniform(0.2),
        "tent": KernelSpec.tent(0.3),
        "gauss": KernelSpec.truncated_gaussian(0.08),
    }.items()
}

fields = arrays(np.float64, N, elements=st.floats(-10, 10, allow_nan=False))
resources = arrays(np.float64, N, elements=st.floats(0, 5, allow_nan=False)).filter(lambda v: np.ptp(v) > 1e-3)
kernels = st.sampled_from(sorted(OPS))


@given(kernels, fields)
def test_conservation(name, u):
    op = OPS[name]
    Lu = op.apply(u)
    assert abs(integrate(GRID, Lu)) <= 1e-12 * max(1.0, integrate(GRID, np.abs(u)))


@given(kernels, fields)
def test_dissipation(name, u):
    op = OPS[name]
    assert integrate(GRID, op.apply(u) * u) <= 1e-12 * max(1.0, integrate(GRID, u * u))


@given(kernels, fields, fields)
def test_symmetry(name, u, v):
    op = OPS[name]
    lhs, rhs = np.dot(op.convolve(u), v), np.dot(u, op.convolve(v))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.abs(u).sum() * np.abs(v).sum())


@given(kernels, fields, st.sampled_from(["matfree", "fft"]))
def test_backend_agreement(name, u, backend):
    op = OPS[name]
    ref = op.apply(u)
    assert np.max(np.abs(op.with_backend(backend).apply(u) - ref)) <= 1e-10 * max(1.0, np.abs(u).max())


@given(kernels, fields)
def test_positivity_preserving_kernel(name, u):
    op = OPS[name]
    assert np.all(op.convolve(np.abs(u)) >= -1e-14)


@settings(max_examples=40, deadline=None)
@given(kernels, resources, st.floats(0.05, 20.0))
def test_steady_state_bounds(name, values, d):
    op = OPS[name]
    m = from_values(GRID, values, normalize=True)
    st_ = solve_fixed_point(op, m, d, tol=1e-12)
    assert st_.theta.min() > 0
    assert st_.theta.max() <= m.sup_norm + 1e-9
    assert st_.total_population > m.total
    assert st_.residual <= 1e-9


@settings(max_examples=15, deadline=None)
@given(kernels, resources, st.floats(0.1, 5.0), st.floats(1e-3, 3.0))
def test_time_stepping_stays_positive_and_bounded(name, values, d, u0):
    op = OPS[name]
    m = from_values(GRID, values, normalize=True)
    tr = evolve(op, m, d, u0, 0.9 * stable_time_step(op, m, d), 5.0)
    assert tr.snapshots.min() >= 0
    assert tr.snapshots.max() <= max(u0, m.sup_norm) + 1e-12
