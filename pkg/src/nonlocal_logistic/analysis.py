"""Total-population diagnostics: criterion (A), d-sweeps and the upper-bound constants."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonlocalError
from .grid import Domain, Grid, build_grid, integrate
from .kernel import DiscreteOperator, KernelSpec
from .resources import FamilySpec, Resource, cells_for_support, validate_M1
from .steady import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_fixed_point

log = logging.getLogger(__name__)


def default_epsilon_grid() -> np.ndarray:
    return np.geomspace(1e-3, 4.0, 24)


# -- criterion (A) -------------------------------------------------------------


@dataclass
class CriterionAReport:
    d: float
    epsilon_grid: np.ndarray
    masses: np.ndarray
    level_set_measures: np.ndarray
    max_feasible_epsilon: float | None

    @property
    def feasible(self) -> bool:
        return self.max_feasible_epsilon is not None

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "epsilon_grid": self.epsilon_grid.tolist(),
            "masses": self.masses.tolist(),
            "level_set_measures": self.level_set_measures.tolist(),
            "max_feasible_epsilon": self.max_feasible_epsilon,
            "feasible": self.feasible,
        }


def criterion_A(m: Resource, d: float, a: np.ndarray, epsilon_grid: Sequence[float] | None = None) -> CriterionAReport:
    """Resource mass on ``{m/d > (1 + eps) a}`` for every ``eps`` in the grid.

    ``max_feasible_epsilon`` is the largest grid ``eps`` whose mass is at
    least ``eps`` (None if there is none).
    """
    eps = default_epsilon_grid() if epsilon_grid is None else np.asarray(epsilon_grid, dtype=float)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) <= 0):
        raise ValueError("epsilon_grid must be positive and strictly increasing")
    a = np.asarray(a, dtype=float)
    ratio = m.field / d
    g = m.grid
    masses = np.empty(eps.size)
    measures = np.empty(eps.size)
    for k, e in enumerate(eps):
        inside = ratio > (1.0 + e) * a
        masses[k] = integrate(g, np.where(inside, m.field, 0.0))
        measures[k] = np.count_nonzero(inside) * g.cell_measure
    ok = eps[masses >= eps]
    best = float(ok.max()) if ok.size else None
    return CriterionAReport(float(d), eps, masses, measures, best)


# -- bound constants -------------------------------------------------------------


@dataclass
class BoundConstants:
    K1: float
    K2: float
    K3: float
    C1: float
    m_total: float
    omega_measure: float
    kernel_sup: float
    min_a: float
    C0_estimate: float | None = None

    def upper_bound(self, d: float) -> float:
        """``C1 sqrt(d)``, valid for ``d >= 1``."""
        return self.C1 * math.sqrt(d)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def bound_constants(m_total: float, omega_measure: float, kernel_sup: float, min_a: float) -> BoundConstants:
    """Constants of the ``C1 sqrt(d)`` upper bound on the total population."""
    for name, v in (("m_total", m_total), ("omega_measure", omega_measure), ("kernel_sup", kernel_sup), ("min_a", min_a)):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive and finite, got {v}")
    if min_a > 1.0 + 1e-12:
        raise ValueError("min_a cannot exceed 1")
    K1 = 2.0 * kernel_sup * omega_measure
    K2 = 4.0 * (m_total + K1 * omega_measure) * kernel_sup / min_a + 2.0 * kernel_sup * omega_measure
    K3 = 2.0 * (K2 + 2.0) * m_total + (4.0 / omega_measure) * (m_total / min_a) ** 2
    C1 = 2.0 * (m_total + math.sqrt(K3 * omega_measure))
    return BoundConstants(K1, K2, K3, C1, m_total, omega_measure, kernel_sup, min_a)


def operator_bound_constants(op: DiscreteOperator, m_total: float = 1.0) -> BoundConstants:
    sup = op.kernel.sup if op.kernel is not None else float(np.max(op.kernel_matrix))
    return bound_constants(m_total, op.grid.measure, sup, float(np.min(op.a)))


# -- level sets ------------------------------------------------------------------


@dataclass
class LevelSetReport:
    d: float
    omega1_measure: float
    omega1_mass: float
    omega2_measure: float
    omega2_mass: float
    omega2_bound: float
    omega2_within_bound: bool
    omega2_inclusion_violations: int
    omega_d_measure: float
    claim1: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        claims = all(c["holds"] for c in self.claim1 if c["asserted"])
        return self.omega2_within_bound and self.omega2_inclusion_violations == 0 and claims

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def level_set_diagnostics(
    theta: np.ndarray,
    m: Resource,
    d: float,
    a: np.ndarray,
    constants: BoundConstants,
    epsilons: Sequence[float] = (0.1, 0.5),
    slack: float = 0.1,
) -> LevelSetReport:
    """Sizes of the level sets used by the upper-bound and necessity arguments.

    ``Omega1 = {theta > K1 d}``, ``Omega2 = {theta > K2 d}``,
    ``Omega_d = {m <= d^(3/4) a}``.  Checks ``Omega2`` lies in
    ``{m >= d a / 2}`` and ``|Omega2| <= (1 + slack) (2 / min a) int m / d``.
    For each ``eps`` the Claim-1 set ``{theta >= 2 max(a) d eps}`` is checked
    to sit inside ``{m > (1 + eps) d a}``; the check is asserted only above
    the dispersal threshold the argument needs, which is reported.
    """
    g = m.grid
    theta = np.asarray(theta, dtype=float)
    a = np.asarray(a, dtype=float)
    cm = g.cell_measure
    mf = m.field
    m_total = m.total

    o1 = theta > constants.K1 * d
    o2 = theta > constants.K2 * d
    tilde2 = mf >= 0.5 * d * a
    bound = (2.0 / constants.min_a) * m_total / d
    o2_measure = np.count_nonzero(o2) * cm

    claims = []
    a_max = float(np.max(a))
    ck = constants.C1 * constants.kernel_sup
    for eps in epsilons:
        alpha = 2.0 * a_max * eps
        cut = alpha * d
        top = theta >= cut
        bad = top & ~(mf > (1.0 + eps) * d * a)
        threshold = max(ck**2 / alpha**4, (16.0 * ck / (3.0 * alpha**2)) ** 2)
        claims.append(
            {
                "epsilon": float(eps),
                "theta_cut": float(cut),
                "set_measure": float(np.count_nonzero(top) * cm),
                "violations": int(np.count_nonzero(bad)),
                "d_threshold": float(threshold),
                "asserted": bool(d >= threshold),
                "holds": bool(not bad.any()),
            }
        )

    return LevelSetReport(
        d=float(d),
        omega1_measure=float(np.count_nonzero(o1) * cm),
        omega1_mass=integrate(g, np.where(o1, theta, 0.0)),
        omega2_measure=float(o2_measure),
        omega2_mass=integrate(g, np.where(o2, theta, 0.0)),
        omega2_bound=float(bound),
        omega2_within_bound=bool(o2_measure <= (1.0 + slack) * bound),
        omega2_inclusion_violations=int(np.count_nonzero(o2 & ~tilde2)),
        omega_d_measure=float(np.count_nonzero(mf <= d**0.75 * a) * cm),
        claim1=claims,
    )


# -- power-law fits and sweeps ---------------------------------------------------------


@dataclass
class PowerFit:
    exponent: float
    coefficient: float
    r2: float
    window: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "r2": self.r2,
            "window": list(self.window),
        }


def fit_power_law(d: Sequence[float], totals: Sequence[float], window: str = "trailing_half") -> PowerFit:
    """Least-squares fit of ``log total = log c + p log d``.

    ``window="trailing_half"`` fits the last ``ceil(n/2)`` samples (at least
    two); ``"all"`` fits everything.
    """
    x = np.log(np.asarray(d, dtype=float))
    y = np.log(np.asarray(totals, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples to fit")
    if window == "trailing_half":
        start = n - max(2, math.ceil(n / 2))
    elif window == "all":
        start = 0
    else:
        raise ValueError(f"unknown fit window {window!r}")
    xs, ys = x[start:], y[start:]
    p, logc = np.polyfit(xs, ys, 1)
    pred = logc + p * xs
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(float(p), float(math.exp(logc)), r2, (start, n))


@dataclass
class SweepSample:
    d: float
    total: float
    residual: float
    relative_residual: float
    iterations: int
    n_cells: int
    max_feasible_epsilon: float | None
    upper_bound: float

    @property
    def total_over_sqrt_d(self) -> float:
        return self.total / math.sqrt(self.d)


@dataclass
class SweepResult:
    samples: list[SweepSample]
    fit: PowerFit | None
    descriptor: dict
    tol: float
    complete: bool = True
    error: str | None = None

    @property
    def d(self) -> np.ndarray:
        return np.array([s.d for s in self.samples])

    @property
    def totals(self) -> np.ndarray:
        return np.array([s.total for s in self.samples])

    @property
    def ratios(self) -> np.ndarray:
        """``total / sqrt(d)`` per sample."""
        return np.array([s.total_over_sqrt_d for s in self.samples])

    @property
    def C0_estimate(self) -> float | None:
        r = [s.total_over_sqrt_d for s in self.samples if s.d >= 1]
        return min(r) if r else None

    @property
    def ratio_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.ratios) < 0))

    @property
    def upper_bound_ok(self) -> bool:
        return all(s.total <= s.upper_bound for s in self.samples if s.d >= 1)

    @property
    def population_excess_ok(self) -> bool:
        return all(s.total > 1.0 for s in self.samples)

    @property
    def criterion_feasible(self) -> bool:
        return all(s.max_feasible_epsilon is not None for s in self.samples)

    @property
    def min_feasible_epsilon(self) -> float | None:
        eps = [s.max_feasible_epsilon for s in self.samples]
        return None if any(e is None for e in eps) or not eps else min(eps)

    def to_dict(self) -> dict:
        return {
            "descriptor": self.descriptor,
            "complete": self.complete,
            "error": self.error,
            "tol": self.tol,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "C0_estimate": self.C0_estimate,
            "ratio_decreasing": self.ratio_decreasing,
            "upper_bound_ok": self.upper_bound_ok,
            "population_excess_ok": self.population_excess_ok,
            "criterion_feasible": self.criterion_feasible,
            "min_feasible_epsilon": self.min_feasible_epsilon,
            "samples": [
                {
                    "d": s.d,
                    "total": s.total,
                    "total_over_sqrt_d": s.total_over_sqrt_d,
                    "residual": s.residual,
                    "relative_residual": s.relative_residual,
                    "iterations": s.iterations,
                    "n_cells": s.n_cells,
                    "max_feasible_epsilon": s.max_feasible_epsilon,
                    "upper_bound": s.upper_bound,
                }
                for s in self.samples
            ],
        }


Member = Callable[[float], "tuple[DiscreteOperator, Resource]"]


class BangBangFamily:
    """``d -> (operator, resource)`` for a resource family, refining the grid per ``d``.

    With ``cells=None`` the resolution is the smallest that gives every
    bang-bang support ``min_support_cells`` cells (but at least
    ``min_cells``); operators are cached per resolution.
    """

    def __init__(
        self,
        domain: Domain,
        kernel: KernelSpec,
        family: FamilySpec,
        cells: int | None = None,
        min_cells: int = 256,
        min_support_cells: int = 8,
        backend: str = "auto",
        boundary: str = "neumann",
    ):
        self.domain = domain
        self.kernel = kernel
        self.family = family
        self.cells = cells
        self.min_cells = min_cells
        self.min_support_cells = min_support_cells
        self.backend = backend
        self.boundary = boundary
        self._ops: dict[int, DiscreteOperator] = {}

    def resolution(self, d: float) -> int:
        if self.cells is not None:
            return int(self.cells)
        height = self.family.height(d)
        n = self.min_cells
        if height is not None:
            n = max(n, cells_for_support(self.domain, height, self.min_support_cells))
        return n

    def operator(self, n: int) -> DiscreteOperator:
        if n not in self._ops:
            grid = build_grid(self.domain, n)
            self._ops[n] = DiscreteOperator(grid, self.kernel, self.backend, self.boundary)
        return self._ops[n]

    def __call__(self, d: float):
        op = self.operator(self.resolution(d))
        m = self.family.build(op.grid, d, self.kernel.support_radius)
        return op, m

    def describe(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "kernel": self.kernel.to_dict(),
            "family": self.family.to_dict(),
            "cells": self.cells if self.cells is not None else "auto",
            "min_support_cells": self.min_support_cells,
            "boundary": self.boundary,
        }


def sweep(
    family: Member,
    d_grid: Sequence[float],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: int = 1,
    window: str = "trailing_half",
    epsilon_grid: Sequence[float] | None = None,
    descriptor: dict | None = None,
    require_m1: bool = True,
) -> SweepResult:
    """Solve ``theta_{d, m_d}`` along ``d_grid`` and fit ``total ~ c d^p``.

    Members are solved concurrently on ``threads`` workers; results are
    assembled in ``d`` order.  A failing member stops the sweep: the result
    keeps the samples before it and is flagged incomplete.
    """
    d_grid = [float(d) for d in d_grid]
    if any(b <= a for a, b in zip(d_grid, d_grid[1:])) or not d_grid or d_grid[0] <= 0:
        raise ValueError("d_grid must be positive and strictly increasing")
    if descriptor is None:
        descriptor = family.describe() if hasattr(family, "describe") else {}

    def member(d: float) -> SweepSample:
        op, m = family(d)
        if require_m1:
            rep = validate_M1(m)
            if not rep.passed:
                raise NonlocalError(f"family member at d={d:g} is not in M1: {rep.to_dict()}")
        state = solve_fixed_point(op, m, d, tol=tol, max_iter=max_iter)
        crit = criterion_A(m, d, op.a, epsilon_grid)
        ub = operator_bound_constants(op, m.total).upper_bound(d)
        log.info("sweep d=%g: total %.6g (%d iterations, %d cells)", d, state.total_population, state.iterations, op.grid.n_cells)
        return SweepSample(
            d, state.total_population, state.residual, state.relative_residual,
            state.iterations, op.grid.n_cells, crit.max_feasible_epsilon, ub,
        )

    samples: list[SweepSample] = []
    error = None
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        futures = [pool.submit(member, d) for d in d_grid]
        for d, fut in zip(d_grid, futures):
            try:
                samples.append(fut.result())
            except NonlocalError as exc:
                error = f"d={d:g}: {exc}"
                for f in futures:
                    f.cancel()
                break

    fit = fit_power_law([s.d for s in samples], [s.total for s in samples], window) if len(samples) >= 2 else None
    return SweepResult(samples, fit, descriptor, tol, complete=error is None, error=error)
