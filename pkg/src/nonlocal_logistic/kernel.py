"""Dispersal kernels and the discrete nonlocal operator.

A kernel is a radial profile ``J`` with unit mass over R^n.  On a uniform
grid the operator only needs the quadrature weights ``w(o)`` for every
integer cell offset ``o``, so all three backends (dense matrix, direct
matrix-free sums, zero-padded FFT) share one stencil and differ only in
summation order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import integrate as sint
from scipy.special import erf

from . import _kernels
from .errors import BackendError, QuadratureError, ResolutionError
from .grid import Grid

KERNEL_KINDS = ("uniform", "tent", "truncated_gaussian", "ring", "tabulated")
BACKENDS = ("dense", "matfree", "fft")
BOUNDARY_CONDITIONS = ("neumann", "dirichlet")
QUADRATURES = ("cell_average", "point")

MASS_TOL = 1e-6
OVERSHOOT_TOL = 1e-6
# sub-cell points per axis for 2D cell-averaged weights
SUBCELL_POINTS = 4
DENSE_LIMIT = 2048


@dataclass(frozen=True)
class KernelSpec:
    """Radially symmetric, unit-mass dispersal kernel ``J(x - y)``.

    ``ring`` is the two-level profile used for the interior-concentration
    example: ``J = delta`` on ``|z| <= 1``, ``delta + slope (|z| - 1)`` on
    ``1 < |z| <= 2`` and zero beyond.  Its parameters must already give unit
    mass (``4 delta + slope = 1`` in 1D).
    """

    kind: str
    dim: int = 1
    radius: float | None = None
    sigma: float | None = None
    cutoff: float = 3.0
    delta: float | None = None
    slope: float | None = None
    table_r: tuple[float, ...] = ()
    table_v: tuple[float, ...] = ()
    _scale: float = field(default=1.0, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise ValueError("kernel dimension must be 1 or 2")
        if self.kind in ("uniform", "tent"):
            if not (self.radius and self.radius > 0):
                raise ValueError(f"{self.kind} kernel needs radius > 0")
        elif self.kind == "truncated_gaussian":
            if not (self.sigma and self.sigma > 0 and self.cutoff > 0):
                raise ValueError("truncated_gaussian needs sigma > 0 and cutoff > 0")
        elif self.kind == "ring":
            if not (self.delta and self.delta > 0 and self.slope is not None and self.slope > 0):
                raise ValueError("ring kernel needs delta > 0 and slope > 0")
            mass = self._ring_mass()
            if abs(mass - 1.0) > MASS_TOL:
                raise ValueError(f"ring kernel parameters give mass {mass:.8g}, not 1")
        else:
            self._check_table()

    # -- constructors ------------------------------------------------------

    @classmethod
    def uniform(cls, radius: float, dim: int = 1) -> "KernelSpec":
        return cls("uniform", dim=dim, radius=float(radius))

    @classmethod
    def tent(cls, radius: float, dim: int = 1) -> "KernelSpec":
        return cls("tent", dim=dim, radius=float(radius))

    @classmethod
    def truncated_gaussian(cls, sigma: float, cutoff: float = 3.0, dim: int = 1) -> "KernelSpec":
        return cls("truncated_gaussian", dim=dim, sigma=float(sigma), cutoff=float(cutoff))

    @classmethod
    def ring(cls, delta: float, slope: float, dim: int = 1) -> "KernelSpec":
        return cls("ring", dim=dim, delta=float(delta), slope=float(slope))

    @classmethod
    def tabulated(
        cls, radii: Sequence[float], values: Sequence[float], dim: int = 1, normalize: bool = True
    ) -> "KernelSpec":
        """Piecewise-linear radial profile through ``(radii, values)``, zero beyond.

        With ``normalize`` the values are rescaled to unit mass; otherwise the
        table must already integrate to 1 within ``MASS_TOL``.
        """
        r = tuple(float(x) for x in radii)
        v = tuple(float(x) for x in values)
        raw = cls("tabulated", dim=dim, table_r=r, table_v=v)
        mass = raw._table_mass()
        if normalize:
            return cls("tabulated", dim=dim, table_r=r, table_v=v, _scale=1.0 / mass)
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"tabulated kernel has mass {mass:.8g}; pass normalize=True")
        return raw

    @classmethod
    def from_csv(cls, path, dim: int = 1, normalize: bool = True) -> "KernelSpec":
        """Read a two-column ``radius,value`` table (header line optional)."""
        radii, values = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    r, v = float(row[0]), float(row[1])
                except ValueError:
                    if not radii:
                        continue  # header
                    raise
                radii.append(r)
                values.append(v)
        return cls.tabulated(radii, values, dim=dim, normalize=normalize)

    # -- profile ---------------------------------------------------------

    def _check_table(self):
        r, v = np.asarray(self.table_r), np.asarray(self.table_v)
        if r.size < 2 or r.size != v.size:
            raise ValueError("tabulated kernel needs >= 2 (radius, value) pairs")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("tabulated radii must start at 0 and increase strictly")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("tabulated kernel values must be finite and nonnegative")
        if v[0] <= 0:
            # positivity of J(0) is needed for k(x, x) > 0; no guessing
            raise ValueError("tabulated kernel must have J(0) > 0")

    def _ring_mass(self) -> float:
        if self.dim == 1:
            return 4.0 * self.delta + self.slope
        return 4.0 * math.pi * self.delta + 5.0 * math.pi * self.slope / 3.0

    def _table_mass(self) -> float:
        r, v = np.asarray(self.table_r), np.asarray(self.table_v)
        ra, rb, va, vb = r[:-1], r[1:], v[:-1], v[1:]
        if self.dim == 1:
            return float(2.0 * np.sum(0.5 * (va + vb) * (rb - ra)))
        seg = (rb - ra) / 6.0 * (va * (2 * ra + rb) + vb * (ra + 2 * rb))
        return float(2.0 * math.pi * np.sum(seg))

    @property
    def support_radius(self) -> float:
        if self.kind in ("uniform", "tent"):
            return self.radius
        if self.kind == "truncated_gaussian":
            return self.cutoff * self.sigma
        if self.kind == "ring":
            return 2.0
        return self.table_r[-1]

    @property
    def norm_const(self) -> float:
        """Amplitude that gives the profile unit mass."""
        n = self.dim
        if self.kind == "uniform":
            return 1.0 / (2 * self.radius) if n == 1 else 1.0 / (math.pi * self.radius**2)
        if self.kind == "tent":
            return 1.0 / self.radius if n == 1 else 3.0 / (math.pi * self.radius**2)
        if self.kind == "truncated_gaussian":
            s, c = self.sigma, self.cutoff
            if n == 1:
                return 1.0 / (s * math.sqrt(2 * math.pi) * math.erf(c / math.sqrt(2)))
            return 1.0 / (2 * math.pi * s * s * (1 - math.exp(-0.5 * c * c)))
        return self._scale

    def profile(self, r: np.ndarray) -> np.ndarray:
        """``J`` as a function of the distance ``|z|``."""
        r = np.abs(np.asarray(r, dtype=float))
        c = self.norm_const
        if self.kind == "uniform":
            return np.where(r <= self.radius, c, 0.0)
        if self.kind == "tent":
            return c * np.clip(1.0 - r / self.radius, 0.0, None)
        if self.kind == "truncated_gaussian":
            return np.where(r <= self.support_radius, c * np.exp(-0.5 * (r / self.sigma) ** 2), 0.0)
        if self.kind == "ring":
            outer = self.delta + self.slope * (r - 1.0)
            return np.where(r <= 1.0, self.delta, np.where(r <= 2.0, outer, 0.0))
        tr, tv = np.asarray(self.table_r), np.asarray(self.table_v)
        return c * np.interp(r, tr, tv, right=0.0)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.dim == 1:
            return self.profile(z)
        return self.profile(np.linalg.norm(z, axis=-1))

    @property
    def sup(self) -> float:
        """``||J||_inf``."""
        if self.kind == "ring":
            return self.delta + self.slope
        if self.kind == "tabulated":
            return self._scale * max(self.table_v)
        return self.norm_const

    def mass(self) -> float:
        """Independent quadrature of ``J`` over R^n (used by the normalization check)."""
        knots = [0.0, self.support_radius]
        if self.kind == "ring":
            knots = [0.0, 1.0, 2.0]
        elif self.kind == "tabulated":
            knots = list(self.table_r)
        total = 0.0
        for lo, hi in zip(knots[:-1], knots[1:]):
            if self.dim == 1:
                val, _ = sint.quad(lambda t: float(self.profile(t)), lo, hi, epsabs=1e-13, epsrel=1e-12)
                total += 2.0 * val
            else:
                val, _ = sint.quad(
                    lambda t: float(self.profile(t)) * t, lo, hi, epsabs=1e-13, epsrel=1e-12
                )
                total += 2.0 * math.pi * val
        return total

    def antiderivative(self, z: np.ndarray) -> np.ndarray:
        """``G(z) = int_0^z J(t) dt`` in 1D (odd in ``z``)."""
        if self.dim != 1:
            raise ValueError("antiderivative is defined for 1D kernels only")
        z = np.asarray(z, dtype=float)
        s = np.sign(z)
        t = np.minimum(np.abs(z), self.support_radius)
        c = self.norm_const
        if self.kind == "uniform":
            g = c * t
        elif self.kind == "tent":
            g = c * (t - t * t / (2.0 * self.radius))
        elif self.kind == "truncated_gaussian":
            g = c * self.sigma * math.sqrt(math.pi / 2.0) * erf(t / (self.sigma * math.sqrt(2.0)))
        elif self.kind == "ring":
            over = np.clip(t - 1.0, 0.0, None)
            g = self.delta * t + 0.5 * self.slope * over * over
        else:
            tr, tv = np.asarray(self.table_r), np.asarray(self.table_v)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (tv[1:] + tv[:-1]) * np.diff(tr))])
            k = np.clip(np.searchsorted(tr, t, side="right") - 1, 0, tr.size - 2)
            dt = t - tr[k]
            slope = (tv[k + 1] - tv[k]) / (tr[k + 1] - tr[k])
            g = c * (cum[k] + tv[k] * dt + 0.5 * slope * dt * dt)
        return s * g

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind in ("uniform", "tent"):
            out["radius"] = self.radius
        elif self.kind == "truncated_gaussian":
            out.update(sigma=self.sigma, cutoff=self.cutoff)
        elif self.kind == "ring":
            out.update(delta=self.delta, slope=self.slope)
        else:
            out.update(radii=list(self.table_r), values=list(self.table_v))
        return out

    @classmethod
    def from_dict(cls, spec: dict, dim: int | None = None) -> "KernelSpec":
        kind = spec.get("kind")
        n = int(spec.get("dim", dim or 1))
        if kind == "uniform":
            return cls.uniform(spec["radius"], n)
        if kind == "tent":
            return cls.tent(spec["radius"], n)
        if kind == "truncated_gaussian":
            return cls.truncated_gaussian(spec["sigma"], spec.get("cutoff", 3.0), n)
        if kind == "ring":
            return cls.ring(spec["delta"], spec["slope"], n)
        if kind == "tabulated":
            if "csv" in spec:
                return cls.from_csv(spec["csv"], n, spec.get("normalize", True))
            return cls.tabulated(spec["radii"], spec["values"], n, spec.get("normalize", True))
        raise ValueError(f"unknown kernel kind {kind!r}")


# -- stencils ----------------------------------------------------------------


def kernel_stencil(grid: Grid, kernel: KernelSpec, quadrature: str = "cell_average") -> np.ndarray:
    """Quadrature weights ``w(o)`` for integer offsets, centred, cropped to the grid.

    ``cell_average`` integrates ``J`` over each offset cell (exact
    antiderivative in 1D, sub-cell midpoints renormalised to unit total in 2D);
    ``point`` samples ``J`` at the offset and multiplies by the cell measure.
    """
    if quadrature not in QUADRATURES:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    h = np.asarray(grid.spacing)
    rho = kernel.support_radius
    if grid.dim == 1:
        if quadrature == "cell_average":
            R = int(math.ceil(rho / h[0] + 0.5))
            o = np.arange(-R, R + 1) * h[0]
            w = kernel.antiderivative(o + 0.5 * h[0]) - kernel.antiderivative(o - 0.5 * h[0])
        else:
            R = int(math.floor(rho / h[0] + 1e-12))
            w = kernel(np.arange(-R, R + 1) * h[0]) * grid.cell_measure
        keep = min(R, grid.shape[0] - 1)
        return np.ascontiguousarray(w[R - keep : R + keep + 1])

    if quadrature == "cell_average":
        R = [int(math.ceil(rho / h[k] + 0.5)) for k in range(2)]
        q = SUBCELL_POINTS
        sub = (np.arange(q) + 0.5) / q - 0.5
        axes = [np.add.outer(np.arange(-R[k], R[k] + 1) * h[k], sub * h[k]) for k in range(2)]
        # J at every sub-point, averaged over the q*q sub-points of each cell
        dx = axes[0][:, None, :, None]
        dy = axes[1][None, :, None, :]
        vals = kernel.profile(np.sqrt(dx * dx + dy * dy)).mean(axis=(2, 3))
        w = vals * grid.cell_measure
        w = w / w.sum()
    else:
        R = [int(math.floor(rho / h[k] + 1e-12)) for k in range(2)]
        ox = np.arange(-R[0], R[0] + 1) * h[0]
        oy = np.arange(-R[1], R[1] + 1) * h[1]
        w = kernel.profile(np.hypot(ox[:, None], oy[None, :])) * grid.cell_measure
    k0 = min(R[0], grid.shape[0] - 1)
    k1 = min(R[1], grid.shape[1] - 1)
    return np.ascontiguousarray(w[R[0] - k0 : R[0] + k0 + 1, R[1] - k1 : R[1] + k1 + 1])


# -- operator ----------------------------------------------------------------


class DiscreteOperator:
    """``L[u] = int_Omega k(x, y) u(y) dy - r(x) u(x)`` on a grid.

    ``r = a`` (the boundary mass) for the Neumann operator and ``r = 1`` for
    the Dirichlet variant.  Instances are immutable after construction.
    """

    def __init__(
        self,
        grid: Grid,
        kernel: KernelSpec,
        backend: str = "auto",
        boundary: str = "neumann",
        quadrature: str = "cell_average",
        _stencil: np.ndarray | None = None,
        _a: np.ndarray | None = None,
    ):
        if boundary not in BOUNDARY_CONDITIONS:
            raise ValueError(f"unknown boundary condition {boundary!r}")
        if kernel.dim != grid.dim:
            raise ValueError(f"kernel is {kernel.dim}D but grid is {grid.dim}D")
        if 2.0 * kernel.support_radius < 4.0 * grid.h:
            raise ResolutionError(
                f"kernel support diameter {2 * kernel.support_radius:.4g} is below 4h = {4 * grid.h:.4g}"
            )
        if backend == "auto":
            if grid.n_cells <= DENSE_LIMIT:
                backend = "dense"
            else:
                backend = "fft" if grid.is_full else "matfree"
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "fft" and not grid.is_full:
            raise BackendError("fft backend needs an unmasked grid; use matfree")

        self.grid = grid
        self.kernel = kernel
        self.backend = backend
        self.boundary = boundary
        self.quadrature = quadrature
        self.stencil = kernel_stencil(grid, kernel, quadrature) if _stencil is None else _stencil
        self.stencil.setflags(write=False)
        self._dense = None
        self._fft_cache = None
        self.normalization_checked = True

        if _a is None:
            a = self.convolve(np.ones(grid.n_cells))
            over = float(np.max(a)) - 1.0
            if over > OVERSHOOT_TOL:
                raise QuadratureError(
                    f"boundary mass exceeds 1 by {over:.3g}; kernel under-resolved by the grid"
                )
            _a = np.minimum(a, 1.0)
        self.a = _a
        self.a.setflags(write=False)
        self.retention = self.a if boundary == "neumann" else np.ones(grid.n_cells)

    @classmethod
    def from_pairwise(
        cls, grid: Grid, k: Callable[[np.ndarray, np.ndarray], np.ndarray], boundary: str = "neumann"
    ) -> "DiscreteOperator":
        """Dense operator from a general symmetric ``k(x, y)``.

        The unit-mass condition over R^n is not checked for such kernels;
        ``normalization_checked`` is False on the result.
        """
        c = grid.centers
        xi = np.repeat(c, grid.n_cells, axis=0)
        yj = np.tile(c, (grid.n_cells, 1))
        K = np.asarray(k(xi, yj), dtype=float).reshape(grid.n_cells, grid.n_cells)
        if np.any(K < 0) or not np.allclose(K, K.T, rtol=0, atol=1e-14 * max(1.0, np.abs(K).max())):
            raise ValueError("pairwise kernel must be nonnegative and symmetric")
        if np.any(np.diag(K) <= 0):
            raise ValueError("pairwise kernel must satisfy k(x, x) > 0")
        op = cls.__new__(cls)
        op.grid = grid
        op.kernel = None
        op.backend = "dense"
        op.boundary = boundary
        op.quadrature = "point"
        op.stencil = None
        op._dense = 0.5 * (K + K.T) * grid.cell_measure
        op._fft_cache = None
        op.normalization_checked = False
        a = op._dense.sum(axis=1)
        if a.max() - 1.0 > OVERSHOOT_TOL:
            raise QuadratureError("pairwise kernel retains more than unit mass")
        op.a = np.minimum(a, 1.0)
        op.a.setflags(write=False)
        op.retention = op.a if boundary == "neumann" else np.ones(grid.n_cells)
        return op

    def with_backend(self, backend: str) -> "DiscreteOperator":
        """Same operator, different evaluation backend."""
        return DiscreteOperator(
            self.grid, self.kernel, backend, self.boundary, self.quadrature, self.stencil, self.a
        )

    def with_boundary(self, boundary: str) -> "DiscreteOperator":
        return DiscreteOperator(
            self.grid, self.kernel, self.backend, boundary, self.quadrature, self.stencil, self.a
        )

    @property
    def weights(self) -> np.ndarray:
        """Dense matrix ``W`` with ``W @ u = int k(x_i, y) u(y) dy`` (i.e. ``K * cell_measure``)."""
        if self._dense is None:
            g = self.grid
            st = self.stencil
            if g.dim == 1:
                R = (st.shape[0] - 1) // 2
                pad = np.zeros(2 * g.n_cells - 1)
                mid = g.n_cells - 1
                pad[mid - R : mid + R + 1] = st
                off = np.subtract.outer(g.index[:, 0], g.index[:, 0]) + mid
                W = pad[off]
            else:
                R0, R1 = [(s - 1) // 2 for s in st.shape]
                n0, n1 = g.shape
                pad = np.zeros((2 * n0 - 1, 2 * n1 - 1))
                pad[n0 - 1 - R0 : n0 + R0, n1 - 1 - R1 : n1 + R1] = st
                o0 = np.subtract.outer(g.index[:, 0], g.index[:, 0]) + n0 - 1
                o1 = np.subtract.outer(g.index[:, 1], g.index[:, 1]) + n1 - 1
                W = pad[o0, o1]
            self._dense = np.ascontiguousarray(W)
            self._dense.setflags(write=False)
        return self._dense

    @property
    def kernel_matrix(self) -> np.ndarray:
        """``K_ij``, the weights divided by the cell measure."""
        return self.weights / self.grid.cell_measure

    def _fft_convolve(self, u: np.ndarray) -> np.ndarray:
        g = self.grid
        st = self.stencil
        if self._fft_cache is None:
            shape = tuple(sfft.next_fast_len(n + s - 1, real=True) for n, s in zip(g.shape, st.shape))
            self._fft_cache = (shape, sfft.rfftn(st, shape))
        shape, st_hat = self._fft_cache
        box = u.reshape(g.shape) if g.dim == 1 else g.to_box(u)
        full = sfft.irfftn(sfft.rfftn(box, shape) * st_hat, shape)
        R = [(s - 1) // 2 for s in st.shape]
        sl = tuple(slice(r, r + n) for r, n in zip(R, g.shape))
        return np.ascontiguousarray(full[sl]).reshape(-1)

    def convolve(self, u: np.ndarray) -> np.ndarray:
        """``int_Omega k(x, y) u(y) dy`` at every active cell."""
        u = np.ascontiguousarray(u, dtype=float)
        if u.shape != (self.grid.n_cells,):
            raise ValueError(f"field has shape {u.shape}, expected ({self.grid.n_cells},)")
        if self.backend == "dense":
            return self.weights @ u
        if self.backend == "fft":
            return self._fft_convolve(u)
        if self.grid.dim == 1:
            return _kernels.direct_conv_1d(u, self.stencil)
        return _kernels.direct_conv_2d(self.grid.to_box(u), self.stencil, self.grid.index)

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.convolve(u) - self.retention * u

    __call__ = apply

    def available_backends(self) -> list[str]:
        if self.kernel is None:
            return ["dense"]
        out = ["dense", "matfree"] if self.grid.n_cells <= 8192 else ["matfree"]
        if self.grid.is_full:
            out.append("fft")
        return out


def boundary_mass(grid: Grid, kernel: KernelSpec, quadrature: str = "cell_average") -> np.ndarray:
    """``a(x_i) = sum_j w(x_i - x_j)``, the kernel mass retained inside the grid.

    Raises ``QuadratureError`` if any value exceeds 1 by more than 1e-6;
    smaller overshoots are clamped.
    """
    return DiscreteOperator(grid, kernel, quadrature=quadrature).a.copy()


def apply_L(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    return op.apply(u)


# -- self check --------------------------------------------------------------


@dataclass
class SelfCheckReport:
    symmetry: float
    conservation: float | None
    dissipation: float
    backend_gap: float
    backends: list[str]
    n_fields: int

    def passed(self, identity_tol: float = 1e-12, backend_tol: float = 1e-10) -> bool:
        ok = self.symmetry <= identity_tol and self.dissipation <= identity_tol
        if self.conservation is not None:
            ok = ok and self.conservation <= identity_tol
        return ok and self.backend_gap <= backend_tol

    def to_dict(self) -> dict:
        return {
            "symmetry": self.symmetry,
            "conservation": self.conservation,
            "dissipation": self.dissipation,
            "backend_gap": self.backend_gap,
            "backends": list(self.backends),
            "n_fields": self.n_fields,
        }


def operator_selfcheck(op: DiscreteOperator, n_fields: int = 10, seed: int = 0) -> SelfCheckReport:
    """Measure how far the discrete identities the theory relies on are violated.

    All values are relative: symmetry is ``max|W - W^T| / max|W|`` (or the
    bilinear form asymmetry on large grids), conservation is
    ``|int L[u]|`` over ``int |Ku| + r|u|``, dissipation is the positive part
    of ``int L[u] u`` over ``int |Ku u| + r u^2``, and the backend gap is the
    max-norm disagreement between backends relative to the field's max norm.
    """
    rng = np.random.default_rng(seed)
    n = op.grid.n_cells
    fields = rng.standard_normal((n_fields, n))

    if n <= 4096:
        W = op.weights
        symmetry = float(np.max(np.abs(W - W.T)) / max(np.max(np.abs(W)), 1e-300))
    else:
        symmetry = 0.0
        for u, v in zip(fields, fields[::-1] + 0.5):
            lhs = float(np.dot(v, op.convolve(u)))
            rhs = float(np.dot(u, op.convolve(v)))
            symmetry = max(symmetry, abs(lhs - rhs) / (np.abs(u).sum() * np.abs(v).max() + 1e-300))

    conservation = 0.0 if op.boundary == "neumann" else None
    dissipation = 0.0
    for u in fields:
        ku = op.convolve(u)
        Lu = ku - op.retention * u
        if conservation is not None:
            scale = np.sum(np.abs(ku) + op.retention * np.abs(u))
            conservation = max(conservation, abs(float(np.sum(Lu))) / scale)
        form = float(np.sum(Lu * u))
        scale = float(np.sum(np.abs(ku * u) + op.retention * u * u))
        dissipation = max(dissipation, max(0.0, form) / scale)

    backends = op.available_backends()
    gap = 0.0
    if len(backends) > 1:
        ops = {b: (op if b == op.backend else op.with_backend(b)) for b in backends}
        for u in fields:
            ref = ops[backends[0]].convolve(u)
            norm = max(float(np.max(np.abs(ref))), 1e-300)
            for b in backends[1:]:
                gap = max(gap, float(np.max(np.abs(ops[b].convolve(u) - ref))) / norm)
    return SelfCheckReport(symmetry, conservation, dissipation, gap, backends, n_fields)
