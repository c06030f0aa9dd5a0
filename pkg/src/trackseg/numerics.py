"""Tridiagonal solves and semi-implicit 1-D diffusion sweeps shared by the
diffusion-based modules."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _thomas_rows(lower, diag, upper, rhs):
    rows, n = rhs.shape
    x = np.empty_like(rhs)
    cp = np.empty(n)
    dp = np.empty(n)
    for r in range(rows):
        cp[0] = upper[r, 0] / diag[r, 0]
        dp[0] = rhs[r, 0] / diag[r, 0]
        for i in range(1, n):
            m = diag[r, i] - lower[r, i] * cp[i - 1]
            cp[i] = upper[r, i] / m
            dp[i] = (rhs[r, i] - lower[r, i] * dp[i - 1]) / m
        x[r, -1] = dp[-1]
        for i in range(n - 2, -1, -1):
            x[r, i] = dp[i] - cp[i] * x[r, i + 1]
    return x


def thomas_batch(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                 rhs: np.ndarray) -> np.ndarray:
    """Solve a batch of tridiagonal systems along the last axis.

    lower[..., 0] and upper[..., -1] are ignored. Coefficients must make the
    systems diagonally dominant (true for the implicit diffusion matrices here).
    """
    n = rhs.shape[-1]
    shape = rhs.shape
    out = _thomas_rows(
        np.ascontiguousarray(lower, dtype=np.float64).reshape(-1, n),
        np.ascontiguousarray(diag, dtype=np.float64).reshape(-1, n),
        np.ascontiguousarray(upper, dtype=np.float64).reshape(-1, n),
        np.ascontiguousarray(rhs, dtype=np.float64).reshape(-1, n),
    )
    return out.reshape(shape)


def implicit_diffusion_lines(u: np.ndarray, cond: np.ndarray, dt: float,
                             axis: int) -> np.ndarray:
    """Apply (I - dt*A_axis(cond))^-1 along one axis.

    A_axis is the 1-D flux-form second-difference operator with arithmetic-mean
    face conductivities from `cond` and no-flux ends.
    """
    if axis == 0:
        return implicit_diffusion_lines(u.T, cond.T, dt, 1).T
    faces = 0.5 * (cond[:, 1:] + cond[:, :-1])  # between j and j+1
    left = np.zeros_like(u)
    right = np.zeros_like(u)
    left[:, 1:] = faces
    right[:, :-1] = faces
    diag = 1.0 + dt * (left + right)
    return thomas_batch(-dt * left, diag, -dt * right, u)


def aos_step(u: np.ndarray, cond_x: np.ndarray, cond_y: np.ndarray,
             dt: float) -> np.ndarray:
    """One additive-operator-splitting step of div(c grad u) with per-axis
    conductivities: average of the two 1-D semi-implicit solves at 2*dt."""
    sx = implicit_diffusion_lines(u, cond_x, 2.0 * dt, axis=1)
    sy = implicit_diffusion_lines(u, cond_y, 2.0 * dt, axis=0)
    return 0.5 * (sx + sy)


def flux_divergence(c: np.ndarray, u: np.ndarray) -> np.ndarray:
    """div(c grad u) in conservative flux form with arithmetic-mean face
    conductivities and no flux through the border. Sums to zero exactly."""
    out = np.zeros_like(u)
    fx = 0.5 * (c[:, 1:] + c[:, :-1]) * (u[:, 1:] - u[:, :-1])
    fy = 0.5 * (c[1:, :] + c[:-1, :]) * (u[1:, :] - u[:-1, :])
    out[:, :-1] += fx
    out[:, 1:] -= fx
    out[:-1, :] += fy
    out[1:, :] -= fy
    return out
