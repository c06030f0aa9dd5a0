"""Dense 2-D scalar fields and the discrete calculus used by every other module.

Conventions: arrays are (rows, cols) float64; ``x`` is the column direction,
``y`` the row direction. All first derivatives are central differences with
one-sided fallback at the border; the Laplacian is the 5-point stencil with
replicate (no-flux) padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    """A real-valued function sampled on a uniform 2-D grid."""

    data: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"ScalarField data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 3 or arr.shape[1] < 3:
            raise ValueError(f"ScalarField needs at least 3x3 samples, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ScalarField data contains non-finite values")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def like(self, data: np.ndarray) -> "ScalarField":
        """New field on the same grid."""
        return ScalarField(data, self.spacing)


@dataclass(frozen=True)
class FeatureImage:
    """Stack of per-pixel feature channels sharing one grid."""

    channels: list[ScalarField] = field(default_factory=list)

    def __post_init__(self):
        if len(self.channels) < 1:
            raise ValueError("FeatureImage needs at least one channel")
        shape = self.channels[0].shape
        for k, ch in enumerate(self.channels):
            if ch.shape != shape:
                raise ValueError(f"channel {k} shape {ch.shape} != {shape}")

    @property
    def d(self) -> int:
        return len(self.channels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels[0].shape


def gradient(f: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Partial derivatives (d/dx, d/dy): central interior, one-sided border."""
    dy, dx = np.gradient(f.data, f.spacing)
    return f.like(dx), f.like(dy)


def divergence(vx: ScalarField, vy: ScalarField) -> ScalarField:
    """Central-difference divergence, adjoint-consistent with `gradient`."""
    if vx.shape != vy.shape:
        raise ValueError(f"component shapes differ: {vx.shape} vs {vy.shape}")
    ddx = np.gradient(vx.data, vx.spacing, axis=1)
    ddy = np.gradient(vy.data, vy.spacing, axis=0)
    return vx.like(ddx + ddy)


def laplacian(f: ScalarField) -> ScalarField:
    """5-point Laplacian with replicate padding (zero flux through the border)."""
    return f.like(laplacian_array(f.data, f.spacing))


def laplacian_array(a: np.ndarray, spacing: float = 1.0) -> np.ndarray:
    p = np.pad(a, 1, mode="edge")
    out = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * a
    return out / (spacing * spacing)


def delta_eps(x, eps: float):
    """Smoothed Dirac delta: (1/2eps)(1+cos(pi x/eps)) on |x| <= eps, else 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) <= eps, (1.0 + np.cos(np.pi * x / eps)) / (2.0 * eps), 0.0)
    return out if out.ndim else float(out)


def delta_eps_prime(x, eps: float):
    """Analytic derivative of `delta_eps`: -(pi/2eps^2) sin(pi x/eps) on |x| <= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(
        np.abs(x) <= eps, -np.pi / (2.0 * eps * eps) * np.sin(np.pi * x / eps), 0.0
    )
    return out if out.ndim else float(out)


def heaviside(x):
    """Unit step with the symmetric tie-break H(0) = 1/2."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))
    return out if out.ndim else float(out)


def smoothed_heaviside(x, eps: float):
    """Smooth step whose derivative is `delta_eps`; exact 0/1 outside |x| <= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    core = 0.5 * (1.0 + x / eps + np.sin(np.pi * x / eps) / np.pi)
    # rounding can push core a hair outside [0, 1] near the support edges
    core = np.clip(core, 0.0, 1.0)
    out = np.where(x < -eps, 0.0, np.where(x > eps, 1.0, core))
    return out if out.ndim else float(out)


def bilinear_sample(f: ScalarField, x, y):
    """Bilinear interpolation at pixel coordinates (x=col, y=row), clamped to the border."""
    a = f.data
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, f.cols - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, f.rows - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), f.cols - 2)
    y0 = np.minimum(np.floor(y).astype(np.intp), f.rows - 2)
    tx = x - x0
    ty = y - y0
    v = (
        a[y0, x0] * (1 - tx) * (1 - ty)
        + a[y0, x0 + 1] * tx * (1 - ty)
        + a[y0 + 1, x0] * (1 - tx) * ty
        + a[y0 + 1, x0 + 1] * tx * ty
    )
    return v if np.ndim(v) else float(v)
