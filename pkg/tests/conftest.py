import numpy as np
import pytest

from nonlocal_logistic import DiscreteOperator, Domain, KernelSpec, build_grid


@pytest.fixture
def unit_grid():
    return build_grid(Domain.interval(0.0, 1.0), 64)


@pytest.fixture
def unit_op(unit_grid):
    return DiscreteOperator(unit_grid, KernelSpec.uniform(0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
