"""Principal value of ``psi -> d L[psi] + m psi`` and the steady-state energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .grid import integrate
from .kernel import DiscreteOperator
from .resources import Resource


@dataclass
class PrincipalValue:
    mu0: float
    eigenfield: np.ndarray
    iterations: int
    residual: float
    converged: bool = True
    shift: float = 0.0


@dataclass
class EnergyValue:
    value: float
    dispersal: float
    resource: float
    cubic: float


def _check(op: DiscreteOperator, m: Resource):
    if m.grid is not op.grid and m.field.shape != (op.grid.n_cells,):
        raise ValueError("resource and operator live on different grids")


def rayleigh_quotient(op: DiscreteOperator, m: Resource, d: float, psi: np.ndarray) -> float:
    """Discrete version of ``int (d L[psi] psi + m psi^2) / int psi^2``."""
    psi = np.asarray(psi, dtype=float)
    num = np.sum(d * op.apply(psi) * psi + m.field * psi * psi)
    return float(num / np.sum(psi * psi))


def principal_value(
    op: DiscreteOperator,
    m: Resource,
    d: float,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> PrincipalValue:
    """Largest eigenvalue of ``d L + diag(m)`` by shifted power iteration.

    The shift ``d max(r) + max(m)`` makes the shifted map entrywise
    nonnegative and its top eigenvalue dominant in modulus.  Iteration
    starts from ones with a small bump on the first cell and stops when the
    Rayleigh quotient moves by less than ``tol * max(1, |mu|)``.  Raises
    ``ConvergenceError`` (carrying the last iterate) if ``max_iter`` runs out.
    """
    _check(op, m)
    if not d > 0:
        raise ValueError("d must be positive")
    mf = m.field
    shift = d * float(np.max(op.retention)) + float(np.max(mf))
    cm = op.grid.cell_measure

    psi = np.ones(op.grid.n_cells)
    psi[0] += 1e-3
    psi /= np.sqrt(np.sum(psi * psi) * cm)
    Apsi = d * op.apply(psi) + mf * psi
    mu = float(np.sum(Apsi * psi) * cm)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        nxt = Apsi + shift * psi
        psi = nxt / np.sqrt(np.sum(nxt * nxt) * cm)
        Apsi = d * op.apply(psi) + mf * psi
        mu_new = float(np.sum(Apsi * psi) * cm)
        step = abs(mu_new - mu)
        mu = mu_new
        if step <= tol * max(1.0, abs(mu)):
            converged = True
            break

    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
        Apsi = -Apsi
    residual = float(np.sqrt(np.sum((Apsi - mu * psi) ** 2) * cm))
    result = PrincipalValue(mu, psi, it, residual, converged, shift)
    if not converged:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", result)
    return result


def existence_certificate(op: DiscreteOperator, m: Resource, d: float) -> float:
    """A cheap lower bound on ``mu0``: the best Rayleigh quotient over ``psi = 1`` and ``psi = m``.

    A positive value proves the positive steady state exists without any
    eigenvalue iteration.
    """
    best = rayleigh_quotient(op, m, d, np.ones(op.grid.n_cells))
    if np.any(m.field > 0):
        best = max(best, rayleigh_quotient(op, m, d, m.field))
    return best


def energy(op: DiscreteOperator, m: Resource, d: float, v: np.ndarray) -> EnergyValue:
    """``E[v] = 1/2 int (d L[v] v + m v^2) - 1/3 int v^3`` by midpoint quadrature."""
    _check(op, m)
    v = np.asarray(v, dtype=float)
    g = op.grid
    dispersal = integrate(g, d * op.apply(v) * v)
    resource = integrate(g, m.field * v * v)
    cubic = integrate(g, v**3)
    return EnergyValue(0.5 * (dispersal + resource) - cubic / 3.0, dispersal, resource, cubic)
