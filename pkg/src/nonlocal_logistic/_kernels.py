"""Hot loops, each in a numba version and a vectorised numpy version (1D convolution is numpy only).

The public wrappers at the bottom pick one according to
:func:`nonlocal_logistic._accel.numba_enabled`.  Both versions must agree to
rounding; ``tests/test_kernels.py`` pins that.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import signal

from ._accel import njit, numba_enabled

# -- direct (matrix-free) convolution --------------------------------------


@njit
def _direct_conv_2d_nb(u_box, stencil, index):
    n0, n1 = u_box.shape
    r0 = (stencil.shape[0] - 1) // 2
    r1 = (stencil.shape[1] - 1) // 2
    m = index.shape[0]
    out = np.zeros(m)
    for k in range(m):
        i0 = index[k, 0]
        i1 = index[k, 1]
        acc = 0.0
        for a in range(max(0, i0 - r0), min(n0 - 1, i0 + r0) + 1):
            row = a - i0 + r0
            for b in range(max(0, i1 - r1), min(n1 - 1, i1 + r1) + 1):
                acc += stencil[row, b - i1 + r1] * u_box[a, b]
        out[k] = acc
    return out


def _direct_conv_2d_np(u_box, stencil, index):
    full = signal.convolve(u_box, stencil, mode="same", method="direct")
    return full[index[:, 0], index[:, 1]]


def direct_conv_1d(u: np.ndarray, stencil: np.ndarray) -> np.ndarray:
    # np.convolve already runs a vectorised C loop that a compiled loop does not beat,
    # so 1D has no numba variant. The stencil is symmetric: convolution equals correlation.
    return np.convolve(u, stencil, mode="same")


def direct_conv_2d(u_box: np.ndarray, stencil: np.ndarray, index: np.ndarray) -> np.ndarray:
    if numba_enabled():
        return _direct_conv_2d_nb(u_box, stencil, index)
    return _direct_conv_2d_np(u_box, stencil, index)


# -- positive root of t^2 - b t - q/4 = 0 ----------------------------------


@njit
def _stable_root_nb(b, q, floor):
    n = b.shape[0]
    out = np.empty(n)
    for i in range(n):
        qi = q[i] if q[i] > 0.0 else 0.0
        s = math.sqrt(b[i] * b[i] + qi)
        if b[i] >= 0.0:
            t = 0.5 * (b[i] + s)
        elif s - b[i] > 0.0:
            t = qi / (2.0 * (s - b[i]))
        else:
            t = 0.0
        out[i] = t if t > floor else floor
    return out


def _stable_root_np(b, q, floor):
    q = np.maximum(q, 0.0)
    s = np.sqrt(b * b + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = np.where(s - b > 0.0, q / (2.0 * (s - b)), 0.0)
    t = np.where(b >= 0.0, 0.5 * (b + s), neg)
    return np.maximum(t, floor)


def stable_root(b: np.ndarray, q: np.ndarray, floor: float = 1e-300) -> np.ndarray:
    """Positive root of ``t**2 - b*t - q/4`` without cancellation when ``b < 0``."""
    if numba_enabled():
        return _stable_root_nb(b, q, floor)
    return _stable_root_np(b, q, floor)


# -- full fixed-point loop on a dense weight matrix -------------------------


@njit
def _fixed_point_dense_nb(w, b, theta0, d, tol, max_iter, slack, floor):
    n = theta0.shape[0]
    theta = theta0.copy()
    change = np.inf
    prev_change = np.inf
    worst_rise = 0.0
    it = 0
    while it < max_iter:
        it += 1
        q = (4.0 * d) * np.dot(w, theta)
        new = _stable_root_nb(b, q, floor)
        prev_change = change
        change = 0.0
        scale = 1.0
        for i in range(n):
            diff = new[i] - theta[i]
            if diff > worst_rise:
                worst_rise = diff
            if abs(diff) > change:
                change = abs(diff)
            if new[i] > scale:
                scale = new[i]
        theta = new
        if worst_rise > slack * scale:
            break
        if change <= tol * scale:
            break
    return theta, it, change, prev_change, worst_rise


def _fixed_point_generic(convolve, b, theta0, d, tol, max_iter, slack, floor):
    theta = theta0.copy()
    change = np.inf
    prev_change = np.inf
    worst_rise = 0.0
    it = 0
    while it < max_iter:
        it += 1
        new = stable_root(b, 4.0 * d * convolve(theta), floor)
        diff = new - theta
        prev_change = change
        change = float(np.max(np.abs(diff)))
        worst_rise = max(worst_rise, float(np.max(diff)))
        scale = max(1.0, float(np.max(new)))
        theta = new
        if worst_rise > slack * scale:
            break
        if change <= tol * scale:
            break
    return theta, it, change, prev_change, worst_rise


def fixed_point_loop(convolve, w_dense, b, theta0, d, tol, max_iter, slack, floor=1e-300):
    """Iterate ``theta <- root(b, 4 d K theta)`` until the max-norm step is small.

    ``w_dense`` (the quadrature-weighted kernel matrix) selects the compiled
    loop when numba is on; otherwise ``convolve`` is called once per step.
    Returns ``(theta, iterations, last_change, previous_change, worst_rise)``;
    the loop stops early as soon as an iterate rises by more than
    ``slack * max(1, max theta)``.
    """
    if w_dense is not None and numba_enabled():
        theta, it, change, prev, rise = _fixed_point_dense_nb(
            w_dense, b, theta0, float(d), float(tol), int(max_iter), float(slack), float(floor)
        )
        return theta, int(it), float(change), float(prev), float(rise)
    return _fixed_point_generic(convolve, b, theta0, d, tol, max_iter, slack, floor)
