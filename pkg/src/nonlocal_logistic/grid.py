"""Uniform cell grids over bounded habitats, with midpoint quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ResolutionError

DOMAIN_KINDS = ("interval", "rectangle", "disk")


@dataclass(frozen=True)
class Domain:
    """A bounded habitat in one or two dimensions.

    Use the constructors :meth:`interval`, :meth:`rectangle` and :meth:`disk`
    rather than instantiating directly.
    """

    kind: str
    lo: tuple[float, ...] = ()
    hi: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "disk":
            if len(self.center) != 2:
                raise ValueError("disk center must have two coordinates")
            if not (self.radius > 0 and math.isfinite(self.radius)):
                raise ValueError("disk radius must be positive and finite")
        else:
            want = 1 if self.kind == "interval" else 2
            if len(self.lo) != want or len(self.hi) != want:
                raise ValueError(f"{self.kind} needs {want} lower and upper bounds")
            for lo, hi in zip(self.lo, self.hi):
                if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                    raise ValueError(f"need finite lo < hi, got {lo} >= {hi}")

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Domain":
        return cls("interval", lo=(float(lo),), hi=(float(hi),))

    @classmethod
    def rectangle(cls, lo: Sequence[float], hi: Sequence[float]) -> "Domain":
        return cls("rectangle", lo=tuple(map(float, lo)), hi=tuple(map(float, hi)))

    @classmethod
    def disk(cls, center: Sequence[float], radius: float) -> "Domain":
        return cls("disk", center=tuple(map(float, center)), radius=float(radius))

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def measure(self) -> float:
        """Exact Lebesgue measure |Omega|."""
        if self.kind == "disk":
            return math.pi * self.radius**2
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "disk":
            c = np.asarray(self.center)
            return c - self.radius, c + self.radius
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    @property
    def centroid(self) -> np.ndarray:
        lo, hi = self.bounding_box()
        return 0.5 * (lo + hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Open-set membership test for an ``(n, dim)`` array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "disk":
            return np.hypot(*(pts - np.asarray(self.center)).T) < self.radius
        lo, hi = self.bounding_box()
        return np.all((pts > lo) & (pts < hi), axis=1)

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "disk":
            return self.radius - np.hypot(*(pts - np.asarray(self.center)).T)
        lo, hi = self.bounding_box()
        return np.min(np.minimum(pts - lo, hi - pts), axis=1)

    def to_dict(self) -> dict:
        if self.kind == "disk":
            return {"kind": "disk", "center": list(self.center), "radius": self.radius}
        if self.kind == "interval":
            return {"kind": "interval", "lo": self.lo[0], "hi": self.hi[0]}
        return {"kind": "rectangle", "lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, spec: dict) -> "Domain":
        kind = spec.get("kind")
        if kind == "interval":
            return cls.interval(spec["lo"], spec["hi"])
        if kind == "rectangle":
            return cls.rectangle(spec["lo"], spec["hi"])
        if kind == "disk":
            return cls.disk(spec["center"], spec["radius"])
        raise ValueError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cells over the domain's bounding box.

    Only cells whose centers lie in the domain are *active*; every per-cell
    field in the package is indexed by active cell, in C order of the box.
    """

    domain: Domain
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: np.ndarray
    active_mask: np.ndarray
    centers: np.ndarray
    index: np.ndarray
    cell_measure: float
    _flat_active: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_cells(self) -> int:
        return self.centers.shape[0]

    @property
    def h(self) -> float:
        """Largest cell side length."""
        return max(self.spacing)

    @property
    def measure(self) -> float:
        """Total measure of the active cells (the discrete |Omega|)."""
        return self.n_cells * self.cell_measure

    @property
    def is_full(self) -> bool:
        return bool(self.active_mask.all())

    @property
    def x(self) -> np.ndarray:
        """First coordinate of every active center (the coordinates in 1D)."""
        return self.centers[:, 0]

    def sample(self, f: Callable[..., np.ndarray]) -> np.ndarray:
        """Evaluate ``f(x)`` (1D) or ``f(x, y)`` (2D) at the active centers."""
        vals = f(*self.centers.T)
        return np.broadcast_to(np.asarray(vals, dtype=float), (self.n_cells,)).copy()

    def to_box(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Scatter an active-cell field into the full bounding-box array."""
        box = np.full(self.active_mask.size, fill, dtype=float)
        box[self._flat_active] = values
        return box.reshape(self.shape)

    def from_box(self, box: np.ndarray) -> np.ndarray:
        return np.asarray(box).reshape(-1)[self._flat_active]


def build_grid(domain: Domain, cells_per_axis: int | Sequence[int]) -> Grid:
    """Cover ``domain``'s bounding box with ``cells_per_axis`` cells per axis.

    Disk domains keep only cells whose centers lie strictly inside the disk.
    Raises ``ResolutionError`` if no cell is active.
    """
    dim = domain.dim
    if np.isscalar(cells_per_axis):
        counts = (int(cells_per_axis),) * dim
    else:
        counts = tuple(int(c) for c in cells_per_axis)
    if len(counts) != dim:
        raise ValueError(f"expected {dim} cell counts, got {len(counts)}")
    if min(counts) < 2:
        raise ValueError("cells_per_axis must be at least 2")

    lo, hi = domain.bounding_box()
    spacing = tuple(float(s) for s in (hi - lo) / np.asarray(counts))
    axes = [lo[k] + (np.arange(counts[k]) + 0.5) * spacing[k] for k in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    all_centers = np.stack([m.reshape(-1) for m in mesh], axis=1)
    idx_mesh = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    all_index = np.stack([m.reshape(-1) for m in idx_mesh], axis=1)

    if domain.kind == "disk":
        mask = domain.contains(all_centers)
    else:
        mask = np.ones(all_centers.shape[0], dtype=bool)
    if not mask.any():
        raise ResolutionError("grid has no active cells; refine or enlarge the domain")

    flat_active = np.flatnonzero(mask)
    return Grid(
        domain=domain,
        shape=counts,
        spacing=spacing,
        origin=lo,
        active_mask=mask.reshape(counts),
        centers=all_centers[flat_active],
        index=all_index[flat_active],
        cell_measure=float(np.prod(spacing)),
        _flat_active=flat_active,
    )


def integrate(grid: Grid, values: np.ndarray) -> float:
    """Midpoint rule: sum of ``values[i] * cell_measure`` over active cells."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_cells,):
        raise ValueError(
            f"field has shape {values.shape}, grid has {grid.n_cells} active cells"
        )
    return float(np.sum(values) * grid.cell_measure)
