"""Resource distributions m(x) >= 0 with unit total, including bang-bang families."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ResolutionError
from .grid import Domain, Grid, integrate

M1_TOL = 1e-12
MIN_SUPPORT_CELLS = 8
# fraction of min(kernel support radius, domain half-width) used for "near_boundary"
NEAR_BOUNDARY_FRACTION = 0.2

BALL_VOLUME = {1: 2.0, 2: math.pi}


@dataclass(frozen=True, eq=False)
class Resource:
    grid: Grid
    field: np.ndarray
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.field.shape != (self.grid.n_cells,):
            raise ValueError("resource field does not match the grid")
        self.field.setflags(write=False)

    @property
    def total(self) -> float:
        return integrate(self.grid, self.field)

    @property
    def sup_norm(self) -> float:
        return float(np.max(self.field))

    @property
    def is_constant(self) -> bool:
        f = self.field
        return bool(np.ptp(f) <= 1e-12 * max(1.0, float(np.max(np.abs(f)))))

    @property
    def support_measure(self) -> float:
        return float(np.count_nonzero(self.field > 0) * self.grid.cell_measure)


@dataclass(frozen=True)
class BangBangSpec:
    """Plateau of ``height`` on a set of measure ``target_total / height`` around ``center``."""

    height: float
    center: tuple[float, ...]
    shape: str = "ball"
    target_total: float = 1.0


def bang_bang(grid: Grid, spec: BangBangSpec, min_cells: int = MIN_SUPPORT_CELLS) -> Resource:
    """Cell-snapped bang-bang resource with exact discrete total.

    The support is the ``n`` active cells closest to the center (Euclidean
    distance for ``ball``, max-norm for ``block``), where ``n`` rounds the
    ideal support measure to whole cells; the plateau value is then set so
    the midpoint total equals ``target_total`` exactly.
    """
    if not (spec.height > 0 and spec.target_total > 0):
        raise ValueError("height and target_total must be positive")
    if spec.shape not in ("ball", "block"):
        raise ValueError(f"unknown support shape {spec.shape!r}")
    center = np.atleast_1d(np.asarray(spec.center, dtype=float))
    if center.shape != (grid.dim,):
        raise ValueError(f"center must have {grid.dim} coordinates")

    measure = spec.target_total / spec.height
    n_support = int(round(measure / grid.cell_measure))
    if n_support < min_cells:
        raise ResolutionError(
            f"support of measure {measure:.3g} covers {n_support} cells; need >= {min_cells}"
        )
    if n_support > grid.n_cells:
        raise ValueError("support measure exceeds the domain")

    dom = grid.domain
    if spec.shape == "ball":
        reach = (measure / BALL_VOLUME[grid.dim]) ** (1.0 / grid.dim)
    else:
        reach = 0.5 * measure ** (1.0 / grid.dim)
        if dom.kind == "disk":
            reach *= math.sqrt(2.0)
    if not dom.contains(center[None, :])[0] or dom.distance_to_boundary(center[None, :])[0] < reach - 1e-12:
        raise ValueError(f"support of reach {reach:.3g} around {center.tolist()} exceeds the domain")

    diff = grid.centers - center
    dist = np.max(np.abs(diff), axis=1) if spec.shape == "block" else np.linalg.norm(diff, axis=1)
    order = np.lexsort((np.arange(grid.n_cells), np.round(dist / grid.h, 9)))
    chosen = order[:n_support]
    values = np.zeros(grid.n_cells)
    values[chosen] = spec.target_total / (n_support * grid.cell_measure)
    return Resource(
        grid,
        values,
        label="bang_bang",
        params={"height": spec.height, "center": center.tolist(), "shape": spec.shape},
    )


def from_function(grid: Grid, f: Callable[..., np.ndarray], normalize: bool = False) -> Resource:
    """Sample ``f`` at cell centers; rescale to unit total if ``normalize``."""
    return from_values(grid, grid.sample(f), normalize=normalize, label="function")


def from_values(grid: Grid, values: Sequence[float], normalize: bool = False, label: str = "values") -> Resource:
    values = np.array(values, dtype=float)
    if values.shape != (grid.n_cells,):
        raise ValueError(f"expected {grid.n_cells} values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("resource values must be finite")
    if np.any(values < 0):
        raise ValueError(f"resource has negative values (min {values.min():.3g})")
    total = integrate(grid, values)
    if total <= 0:
        raise ValueError("resource is identically zero")
    if normalize:
        values = values / total
    return Resource(grid, values, label=label)


def load_csv(grid: Grid, path, normalize: bool = False) -> Resource:
    """Read ``cell_index,value`` rows; unlisted cells are zero."""
    values = np.zeros(grid.n_cells)
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                i, v = int(row[0]), float(row[1])
            except ValueError:
                continue  # header
            if not 0 <= i < grid.n_cells:
                raise ValueError(f"cell index {i} out of range")
            values[i] = v
    return from_values(grid, values, normalize=normalize, label="csv")


def random_resource(grid: Grid, rng: np.random.Generator, low: float = 0.0, high: float = 2.0) -> Resource:
    """Unit-total resource with i.i.d. uniform cell values before normalization."""
    while True:
        vals = rng.uniform(low, high, grid.n_cells)
        if np.ptp(vals) > 0 and vals.sum() > 0:
            return from_values(grid, vals, normalize=True, label="random")


def cosine_resource(grid: Grid, amplitude: float = 0.5) -> Resource:
    """Smooth positive ``1 + A cos(2 pi s)`` profile along the first axis, unit total."""
    if not 0 < amplitude < 1:
        raise ValueError("amplitude must lie in (0, 1) to keep m positive")
    lo, hi = grid.domain.bounding_box()
    s = (grid.x - lo[0]) / (hi[0] - lo[0])
    return from_values(grid, 1.0 + amplitude * np.cos(2 * np.pi * s), normalize=True, label="cosine")


@dataclass
class M1Report:
    total: float
    deviation: float
    nonnegative: bool
    nonconstant: bool

    @property
    def passed(self) -> bool:
        return self.deviation <= M1_TOL and self.nonnegative and self.nonconstant

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "deviation": self.deviation,
            "nonnegative": self.nonnegative,
            "nonconstant": self.nonconstant,
            "passed": self.passed,
        }


def validate_M1(r: Resource) -> M1Report:
    total = r.total
    return M1Report(
        total=total,
        deviation=abs(total - 1.0),
        nonnegative=bool(np.all(r.field >= 0)),
        nonconstant=not r.is_constant,
    )


# -- placement and families ----------------------------------------------------


def resolve_center(domain: Domain, mode, kernel_radius: float | None = None) -> tuple[float, ...]:
    """Concentration point: ``"interior"``, ``"near_boundary"`` or explicit coordinates.

    ``near_boundary`` sits ``NEAR_BOUNDARY_FRACTION * min(kernel radius,
    domain half-width)`` inside the lower edge of the first axis (for a disk:
    along the negative first axis).
    """
    c = domain.centroid
    if isinstance(mode, str):
        if mode == "interior":
            return tuple(float(v) for v in c)
        if mode != "near_boundary":
            raise ValueError(f"unknown placement {mode!r}")
        lo, hi = domain.bounding_box()
        half = 0.5 * float(np.min(hi - lo))
        if domain.kind == "disk":
            half = domain.radius
        reach = half if kernel_radius is None else min(kernel_radius, half)
        offset = NEAR_BOUNDARY_FRACTION * reach
        p = c.copy()
        p[0] = lo[0] + offset
        return tuple(float(v) for v in p)
    pt = tuple(float(v) for v in np.atleast_1d(mode))
    if len(pt) != domain.dim:
        raise ValueError(f"placement needs {domain.dim} coordinates")
    return pt


FAMILIES = ("example1", "example2", "example3", "lowerbound", "cosine", "random", "constant", "csv")


@dataclass(frozen=True)
class FamilySpec:
    """A resource family indexed by the dispersal rate ``d``.

    Parameters by family: ``example1`` {alpha, beta, x0}; ``example2`` {x0};
    ``example3`` {alpha_hat, x0}; ``lowerbound`` {Md_exponent, x0};
    ``cosine`` {amplitude}; ``random`` {seed}; ``constant`` {value};
    ``csv`` {path}.  ``x0`` is a placement understood by :func:`resolve_center`.
    """

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise ValueError(f"unknown resource family {self.name!r}")

    def height(self, d: float) -> float | None:
        p = self.params
        if self.name == "example1":
            return float(p.get("alpha", 1.0)) * d ** float(p.get("beta", 1.0))
        if self.name == "example2":
            return float(d)
        if self.name == "example3":
            return float(p.get("alpha_hat", 0.3)) * d
        if self.name == "lowerbound":
            return d ** float(p.get("Md_exponent", 2.0))
        return None

    def center(self, domain: Domain, kernel_radius: float | None = None) -> tuple[float, ...]:
        return resolve_center(domain, self.params.get("x0", "interior"), kernel_radius)

    def build(self, grid: Grid, d: float, kernel_radius: float | None = None) -> Resource:
        p = self.params
        height = self.height(d)
        if height is not None:
            spec = BangBangSpec(height, self.center(grid.domain, kernel_radius), p.get("shape", "ball"))
            r = bang_bang(grid, spec, int(p.get("min_cells", MIN_SUPPORT_CELLS)))
            return Resource(grid, np.array(r.field), label=self.name, params={**r.params, "d": d})
        if self.name == "cosine":
            return cosine_resource(grid, float(p.get("amplitude", 0.5)))
        if self.name == "random":
            return random_resource(grid, np.random.default_rng(int(p.get("seed", 0))))
        if self.name == "constant":
            return from_values(grid, np.full(grid.n_cells, float(p.get("value", 1.0))), label="constant")
        return load_csv(grid, p["path"], normalize=bool(p.get("normalize", False)))

    def to_dict(self) -> dict:
        return {"family": self.name, **self.params}


def cells_for_support(domain: Domain, height: float, min_cells: int = MIN_SUPPORT_CELLS) -> int:
    """Cells per axis so a support of measure ``1/height`` spans at least ``min_cells`` cells."""
    lo, hi = domain.bounding_box()
    box = float(np.prod(hi - lo))
    per_axis = (min_cells * height * box) ** (1.0 / domain.dim)
    # tolerate rounding just above an exact integer
    return int(math.ceil(per_axis * (1 - 1e-12)))


def lower_bound_ratio(d: float, height: float, a_at_center: float) -> float:
    """``M_d / (d a(x0))``; the lower-bound construction needs this above 1."""
    return height / (d * a_at_center)
