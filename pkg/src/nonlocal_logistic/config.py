"""Experiment configuration: JSON in, validated dataclass out, and back."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import Domain
from .kernel import BACKENDS, BOUNDARY_CONDITIONS, KernelSpec
from .resources import FAMILIES, FamilySpec, MIN_SUPPORT_CELLS, cells_for_support
from .steady import DEFAULT_MAX_ITER, DEFAULT_TOL

SCHEMA_VERSION = 1


def _d_grid(spec) -> tuple[float, ...]:
    if isinstance(spec, dict):
        start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        if spec.get("spacing", "geometric") == "geometric":
            return tuple(float(v) for v in np.geomspace(start, stop, num))
        return tuple(float(v) for v in np.linspace(start, stop, num))
    return tuple(float(v) for v in spec)


@dataclass(frozen=True)
class ExperimentConfig:
    domain: Domain
    kernel: KernelSpec
    family: FamilySpec
    cells: int | None = None
    min_cells: int = 256
    min_support_cells: int = MIN_SUPPORT_CELLS
    d: float | None = None
    d_grid: tuple[float, ...] | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    boundary: str = "neumann"
    backend: str = "auto"
    epsilon_grid: tuple[float, ...] | None = None
    output_dir: str | None = None
    seed: int = 0
    examples: dict = field(default_factory=dict)

    def d_values(self) -> tuple[float, ...]:
        """``d_grid`` if set, else the single ``d``."""
        if self.d_grid:
            return self.d_grid
        return () if self.d is None else (self.d,)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "domain": self.domain.to_dict(),
            "kernel": self.kernel.to_dict(),
            "resource": self.family.to_dict(),
            "resolution": (
                {"cells_per_axis": self.cells}
                if self.cells is not None
                else {"auto": True, "min_cells": self.min_cells, "min_support_cells": self.min_support_cells}
            ),
            "solver": {"tol": self.tol, "max_iter": self.max_iter},
            "boundary_condition": self.boundary,
            "backend": self.backend,
            "seed": self.seed,
        }
        if self.cells is not None:
            out["resolution"]["min_support_cells"] = self.min_support_cells
        if self.d is not None:
            out["d"] = self.d
        if self.d_grid is not None:
            out["d_grid"] = list(self.d_grid)
        if self.epsilon_grid is not None:
            out["epsilon_grid"] = list(self.epsilon_grid)
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        if self.examples:
            out["examples"] = dict(self.examples)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Parse and validate; raises ``ConfigError`` listing every problem."""
        errors: list[str] = []
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            errors.append(f"schema_version: unsupported {version!r} (expected {SCHEMA_VERSION})")

        domain = kernel = family = None
        try:
            domain = Domain.from_dict(raw.get("domain", {"kind": "interval", "lo": 0.0, "hi": 1.0}))
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"domain: {exc}")
        try:
            kspec = raw.get("kernel")
            if kspec is None:
                raise ValueError("missing")
            kernel = KernelSpec.from_dict(kspec, dim=domain.dim if domain else 1)
            if domain is not None and kernel.dim != domain.dim:
                raise ValueError(f"kernel is {kernel.dim}D, domain is {domain.dim}D")
        except (KeyError, TypeError, ValueError, OSError) as exc:
            errors.append(f"kernel: {exc}")
        try:
            rspec = dict(raw.get("resource", {"family": "cosine"}))
            name = rspec.pop("family", None)
            if name not in FAMILIES:
                raise ValueError(f"unknown family {name!r}; choose from {', '.join(FAMILIES)}")
            family = FamilySpec(name, rspec)
        except (TypeError, ValueError) as exc:
            errors.append(f"resource: {exc}")

        res = raw.get("resolution", {"auto": True})
        cells = res.get("cells_per_axis")
        min_cells = int(res.get("min_cells", 256))
        min_support = int(res.get("min_support_cells", MIN_SUPPORT_CELLS))
        if cells is not None and (not isinstance(cells, int) or cells < 2):
            errors.append("resolution.cells_per_axis: must be an integer >= 2")
        if min_cells < 2 or min_support < 1:
            errors.append("resolution: min_cells >= 2 and min_support_cells >= 1 required")

        d = raw.get("d")
        if d is not None and not (isinstance(d, (int, float)) and math.isfinite(d) and d > 0):
            errors.append(f"d: must be a positive number, got {d!r}")
        d_grid = None
        if raw.get("d_grid") is not None:
            try:
                d_grid = _d_grid(raw["d_grid"])
                if not d_grid or d_grid[0] <= 0 or any(b <= a for a, b in zip(d_grid, d_grid[1:])):
                    raise ValueError("must be positive and strictly increasing")
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"d_grid: {exc}")
                d_grid = None

        solver = raw.get("solver", {})
        tol = solver.get("tol", DEFAULT_TOL)
        max_iter = solver.get("max_iter", DEFAULT_MAX_ITER)
        if not (isinstance(tol, (int, float)) and tol > 0):
            errors.append("solver.tol: must be positive")
        if not (isinstance(max_iter, int) and max_iter >= 1):
            errors.append("solver.max_iter: must be a positive integer")

        boundary = raw.get("boundary_condition", "neumann")
        if boundary not in BOUNDARY_CONDITIONS:
            errors.append(f"boundary_condition: must be one of {BOUNDARY_CONDITIONS}")
        backend = raw.get("backend", "auto")
        if backend not in BACKENDS + ("auto",):
            errors.append(f"backend: must be one of {BACKENDS + ('auto',)}")

        eps = raw.get("epsilon_grid")
        if eps is not None:
            try:
                eps = _d_grid(eps)
                if eps[0] <= 0 or any(b <= a for a, b in zip(eps, eps[1:])):
                    raise ValueError("must be positive and strictly increasing")
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"epsilon_grid: {exc}")
                eps = None

        seed = raw.get("seed", 0)
        if not isinstance(seed, int):
            errors.append("seed: must be an integer")

        if not errors:
            errors.extend(_resolution_errors(domain, kernel, family, cells, min_support, d, d_grid))
        if errors:
            raise ConfigError(errors)
        return cls(
            domain=domain,
            kernel=kernel,
            family=family,
            cells=cells,
            min_cells=min_cells,
            min_support_cells=min_support,
            d=None if d is None else float(d),
            d_grid=d_grid,
            tol=float(tol),
            max_iter=int(max_iter),
            boundary=boundary,
            backend=backend,
            epsilon_grid=eps,
            output_dir=raw.get("output_dir"),
            seed=seed,
            examples=dict(raw.get("examples", {})),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)


def _resolution_errors(domain, kernel, family, cells, min_support, d, d_grid) -> list[str]:
    """Kernel (support >= 4h) and resource (>= min_support cells) guards, before any solve."""
    errors = []
    d_values = list(d_grid or ()) + ([d] if d is not None else [])
    if cells is None:
        return errors
    lo, hi = domain.bounding_box()
    h = float(np.max((hi - lo) / cells))
    if 2 * kernel.support_radius < 4 * h:
        errors.append(
            f"resolution: kernel support diameter {2 * kernel.support_radius:.4g} below 4h = {4 * h:.4g}"
        )
    for dv in d_values:
        height = family.height(dv)
        if height is None:
            continue
        need = cells_for_support(domain, height, min_support)
        if cells < need:
            errors.append(f"resolution: d={dv:g} needs >= {need} cells per axis for a {min_support}-cell support")
    return errors
