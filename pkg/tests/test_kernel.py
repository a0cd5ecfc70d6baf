import numpy as np
import pytest

from nonlocal_logistic import (
    BackendError,
    DiscreteOperator,
    Domain,
    KernelSpec,
    QuadratureError,
    ResolutionError,
    boundary_mass,
    build_grid,
    operator_selfcheck,
)

KERNELS_1D = [
    KernelSpec.uniform(0.1),
    KernelSpec.tent(0.15),
    KernelSpec.truncated_gaussian(0.05),
    KernelSpec.ring(0.1, 0.6),
    KernelSpec.tabulated([0.0, 0.1, 0.2], [2.0, 1.0, 0.0]),
]


@pytest.mark.parametrize("kernel", KERNELS_1D, ids=lambda k: k.kind)
def test_unit_mass(kernel):
    assert kernel.mass() == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize(
    "kernel",
    [KernelSpec.uniform(0.3, dim=2), KernelSpec.tent(0.3, dim=2), KernelSpec.truncated_gaussian(0.1, dim=2)],
    ids=lambda k: k.kind,
)
def test_unit_mass_2d(kernel):
    assert kernel.mass() == pytest.approx(1.0, abs=1e-7)


def test_ring_needs_unit_mass():
    with pytest.raises(ValueError):
        KernelSpec.ring(0.1, 0.5)


def test_tabulated_rejects_vanishing_center():
    with pytest.raises(ValueError):
        KernelSpec.tabulated([0.0, 0.1], [0.0, 1.0])


def test_tabulated_csv(tmp_path):
    p = tmp_path / "k.csv"
    p.write_text("radius,value\n0,2\n0.1,1\n0.2,0\n")
    k = KernelSpec.from_csv(p)
    assert k.mass() == pytest.approx(1.0)
    assert KernelSpec.from_dict(k.to_dict()) == k


def test_uniform_boundary_mass_matches_analytic():
    g = build_grid(Domain.interval(0.0, 1.0), 400)
    r = 0.05
    a = boundary_mass(g, KernelSpec.uniform(r))
    dist = np.minimum(g.x, 1.0 - g.x)
    expected = np.minimum(1.0, 0.5 + dist / (2 * r))
    assert np.max(np.abs(a - expected)) < 1e-12


def test_ring_boundary_mass_is_quadratic_inside():
    g = build_grid(Domain.interval(-1.0, 1.0), 400)
    a = boundary_mass(g, KernelSpec.ring(0.1, 0.6))
    # on (-1, 1) the ring kernel retains 0.2 + 0.3 x^2; cell averaging adds O(h^2)
    assert np.max(np.abs(a - (0.2 + 0.3 * g.x**2))) < 1e-4
    half = a[200:]
    assert np.all(np.diff(half) > 0)


def test_point_quadrature_overshoot_is_refused():
    g = build_grid(Domain.interval(0.0, 1.0), 64)
    with pytest.raises(QuadratureError):
        DiscreteOperator(g, KernelSpec.uniform(0.05), quadrature="point")


def test_resolution_guard():
    g = build_grid(Domain.interval(0.0, 1.0), 10)
    with pytest.raises(ResolutionError):
        DiscreteOperator(g, KernelSpec.uniform(0.15))


def test_fft_refused_on_disk():
    g = build_grid(Domain.disk((0, 0), 1.0), 32)
    with pytest.raises(BackendError):
        DiscreteOperator(g, KernelSpec.uniform(0.3, dim=2), backend="fft")


def test_auto_backend_choice():
    small = build_grid(Domain.interval(0, 1), 100)
    big = build_grid(Domain.interval(0, 1), 5000)
    disk = build_grid(Domain.disk((0, 0), 1.0), 64)
    assert DiscreteOperator(small, KernelSpec.uniform(0.1)).backend == "dense"
    assert DiscreteOperator(big, KernelSpec.uniform(0.1)).backend == "fft"
    assert DiscreteOperator(disk, KernelSpec.uniform(0.2, dim=2)).backend == "matfree"


@pytest.mark.parametrize("backend", ["dense", "matfree", "fft"])
@pytest.mark.parametrize("domain", [Domain.interval(0, 1), Domain.rectangle((0, 0), (1, 0.5))], ids=["1d", "2d"])
def test_backends_agree(backend, domain, rng):
    g = build_grid(domain, 40 if domain.dim == 1 else (24, 12))
    k = KernelSpec.tent(0.2, dim=domain.dim)
    ref = DiscreteOperator(g, k, backend="dense")
    op = ref.with_backend(backend)
    u = rng.standard_normal(g.n_cells)
    assert np.max(np.abs(op.apply(u) - ref.apply(u))) < 1e-12


def test_selfcheck_disk_matfree():
    g = build_grid(Domain.disk((0, 0), 1.0), 40)
    op = DiscreteOperator(g, KernelSpec.truncated_gaussian(0.1, dim=2))
    rep = operator_selfcheck(op)
    assert rep.passed(1e-12, 1e-10)
    assert rep.backends == ["dense", "matfree"]


def test_dirichlet_loses_mass(unit_op):
    op = unit_op.with_boundary("dirichlet")
    L1 = op.apply(np.ones(op.grid.n_cells))
    assert np.allclose(L1, op.a - 1.0)
    assert np.all(L1 <= 0) and L1.min() < 0
    rep = operator_selfcheck(op)
    assert rep.conservation is None and rep.dissipation <= 1e-12


def test_neumann_annihilates_constants(unit_op):
    assert np.max(np.abs(unit_op.apply(np.full(unit_op.grid.n_cells, 3.0)))) < 1e-14


def test_from_pairwise():
    g = build_grid(Domain.interval(0.0, 1.0), 30)
    op = DiscreteOperator.from_pairwise(g, lambda x, y: 0.5 * np.exp(-np.abs(x - y).sum(axis=1)))
    assert not op.normalization_checked
    assert np.allclose(op.weights, op.weights.T)
    assert operator_selfcheck(op).passed()
    with pytest.raises(ValueError):
        DiscreteOperator.from_pairwise(g, lambda x, y: (x - y).sum(axis=1))


def test_kernel_dict_round_trip():
    for k in KERNELS_1D + [KernelSpec.uniform(0.2, dim=2)]:
        assert KernelSpec.from_dict(k.to_dict()) == k
