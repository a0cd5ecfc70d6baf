"""Positive steady state of ``u_t = d L[u] + u (m - u)``.

The production path is the monotone fixed-point scheme: at a steady state
each cell value is the positive root of ``t^2 - (m - d r) t - d (K t) = 0``,
so iterating that root from the supersolution ``||m||_inf`` decreases
monotonically to the solution.  Explicit Euler time stepping (:func:`evolve`)
is kept as an independent oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, MonotonicityError, NoSteadyStateError, StabilityError
from .grid import integrate
from .kernel import DiscreteOperator
from .resources import Resource
from .spectral import existence_certificate, principal_value

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
# allowed rise of an iterate, relative to max(1, max theta), before flagging non-monotonicity
MONOTONE_SLACK = 1e-12
POSITIVITY_FLOOR = 1e-300


@dataclass
class SteadyState:
    theta: np.ndarray
    d: float
    residual: float
    relative_residual: float
    iterations: int
    total_population: float
    method: str
    converged: bool = True
    rate: float | None = None
    mu0_lower_bound: float | None = None

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "residual": self.residual,
            "relative_residual": self.relative_residual,
            "iterations": self.iterations,
            "total_population": self.total_population,
            "method": self.method,
            "converged": self.converged,
            "rate": self.rate,
            "theta_max": float(np.max(self.theta)),
            "theta_min": float(np.min(self.theta)),
        }


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: np.ndarray
    dt: float
    final_residual: float
    steps: int = 0
    stopped_early: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


def residual(op: DiscreteOperator, m: Resource, d: float, theta: np.ndarray) -> float:
    """Max-norm of ``d L[theta] + theta (m - theta)``."""
    theta = np.asarray(theta, dtype=float)
    return float(np.max(np.abs(d * op.apply(theta) + theta * (m.field - theta))))


def residual_scale(op: DiscreteOperator, m: Resource, d: float, theta: np.ndarray) -> float:
    """Typical size of the terms in the residual; used to make tolerances relative."""
    tmax = float(np.max(np.abs(theta)))
    return max(1.0, tmax * (d * float(np.max(op.retention)) + m.sup_norm + tmax))


def solve_fixed_point(
    op: DiscreteOperator,
    m: Resource,
    d: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    check_existence: bool = True,
) -> SteadyState:
    """Monotone iteration for the positive steady state ``theta_{d,m}``.

    Converged means the max-norm step is at most ``tol * max(1, max theta)``
    and the residual is at most ``10 tol`` relative to
    :func:`residual_scale`.  Raises ``NoSteadyStateError`` when the principal
    value is nonpositive, ``ConvergenceError`` when ``max_iter`` runs out and
    ``MonotonicityError`` if an iterate increases.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    if m.field.shape != (op.grid.n_cells,):
        raise ValueError("resource and operator live on different grids")

    lower = None
    if check_existence:
        lower = existence_certificate(op, m, d)
        if not lower > 0:
            try:
                mu0 = principal_value(op, m, d).mu0
            except ConvergenceError as exc:
                mu0 = exc.result.mu0
            if not mu0 > 0:
                raise NoSteadyStateError(f"principal value {mu0:.6g} <= 0: no positive steady state", mu0)
            lower = mu0

    mf = m.field
    b = mf - d * op.retention
    theta0 = np.full(op.grid.n_cells, m.sup_norm)
    dense = op.weights if op.backend == "dense" else None
    theta, its, change, prev, rise = _kernels.fixed_point_loop(
        op.convolve, dense, b, theta0, d, tol, max_iter, MONOTONE_SLACK, POSITIVITY_FLOOR
    )
    scale = max(1.0, float(np.max(theta)))
    if rise > MONOTONE_SLACK * scale:
        raise MonotonicityError(f"iterate rose by {rise:.3g} at step {its}; numerical fault")

    res = residual(op, m, d, theta)
    rel = res / residual_scale(op, m, d, theta)
    rate = change / prev if math.isfinite(prev) and prev > 0 else None
    state = SteadyState(
        theta=theta,
        d=float(d),
        residual=res,
        relative_residual=rel,
        iterations=its,
        total_population=integrate(op.grid, theta),
        method="fixed_point",
        rate=rate,
        mu0_lower_bound=lower,
    )
    log.debug("fixed point d=%g: %d iterations, step %.3g, rel residual %.3g", d, its, change, rel)
    if change > tol * scale or rel > 10 * tol:
        state.converged = False
        raise ConvergenceError(
            f"fixed point not converged after {its} iterations (step {change:.3g}, rel residual {rel:.3g})",
            state,
        )
    return state


def stable_time_step(op: DiscreteOperator, m: Resource, d: float) -> float:
    """Upper bound on the explicit Euler step that keeps the state nonnegative."""
    return 1.0 / (d * float(np.max(op.retention)) + m.sup_norm)


def evolve(
    op: DiscreteOperator,
    m: Resource,
    d: float,
    u0,
    dt: float,
    t_end: float,
    snapshot_every: int | None = None,
    steady_tol: float | None = None,
) -> Trajectory:
    """Explicit Euler for ``u_t = d L[u] + u (m - u)``.

    ``u0`` is a field or a scalar.  Snapshots are kept every
    ``snapshot_every`` steps (default: about 100 per run) plus the initial and
    final states.  With ``steady_tol`` the run stops once the max-norm of the
    right-hand side falls below it.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    bound = stable_time_step(op, m, d)
    if not 0 < dt < bound:
        raise StabilityError(f"dt={dt:.4g} violates the positivity bound dt < {bound:.4g}")
    u = np.broadcast_to(np.asarray(u0, dtype=float), (op.grid.n_cells,)).copy()
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise StabilityError("initial state must be finite and nonnegative")

    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    every = snapshot_every or max(1, n_steps // 100)
    mf = m.field
    times, snaps = [0.0], [u.copy()]
    rhs = d * op.apply(u) + u * (mf - u)
    stopped = False
    step = 0
    for step in range(1, n_steps + 1):
        u = u + dt * rhs
        if np.any(u < 0):
            raise StabilityError(f"negative state at step {step}")
        rhs = d * op.apply(u) + u * (mf - u)
        if steady_tol is not None and np.max(np.abs(rhs)) <= steady_tol:
            stopped = True
            break
        if step % every == 0 and step != n_steps:
            times.append(step * dt)
            snaps.append(u.copy())
    times.append(step * dt)
    snaps.append(u.copy())
    return Trajectory(
        times=np.asarray(times),
        snapshots=np.asarray(snaps),
        dt=dt,
        final_residual=float(np.max(np.abs(rhs))),
        steps=step,
        stopped_early=stopped,
    )
