"""Steady states of the logistic equation with nonlocal dispersal.

Build a grid, a dispersal kernel and a resource, then solve::

    from nonlocal_logistic import Domain, build_grid, KernelSpec, DiscreteOperator
    from nonlocal_logistic import cosine_resource, solve_fixed_point

    grid = build_grid(Domain.interval(0.0, 1.0), 128)
    op = DiscreteOperator(grid, KernelSpec.uniform(0.1))
    state = solve_fixed_point(op, cosine_resource(grid), d=1.0)
"""

__version__ = "0.1.0"

from .analysis import (
    BangBangFamily,
    BoundConstants,
    CriterionAReport,
    LevelSetReport,
    PowerFit,
    SweepResult,
    SweepSample,
    bound_constants,
    criterion_A,
    default_epsilon_grid,
    fit_power_law,
    level_set_diagnostics,
    operator_bound_constants,
    sweep,
)
from .config import ExperimentConfig
from .errors import (
    BackendError,
    ConfigError,
    ConvergenceError,
    MonotonicityError,
    NoSteadyStateError,
    NonlocalError,
    QuadratureError,
    ResolutionError,
    StabilityError,
)
from .grid import Domain, Grid, build_grid, integrate
from .kernel import (
    DiscreteOperator,
    KernelSpec,
    SelfCheckReport,
    apply_L,
    boundary_mass,
    kernel_stencil,
    operator_selfcheck,
)
from .resources import (
    BangBangSpec,
    FamilySpec,
    M1Report,
    Resource,
    bang_bang,
    cosine_resource,
    from_function,
    from_values,
    load_csv,
    random_resource,
    resolve_center,
    validate_M1,
)
from .spectral import EnergyValue, PrincipalValue, energy, existence_certificate, principal_value, rayleigh_quotient
from .steady import SteadyState, Trajectory, evolve, residual, solve_fixed_point, stable_time_step

__all__ = [name for name in dir() if not name.startswith("_")]
