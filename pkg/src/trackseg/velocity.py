"""The two data-driven velocity fields: the photometric distribution-matching
velocity and the curvature-distribution (shape) velocity.

Both are functional gradients of Bhattacharyya coefficients. The photometric
coefficient uses the smoothed-step interior weight (whose derivative is the
smoothed delta), so the returned fields are the exact discrete gradients of the
coefficients reported in the diagnostics; finite-difference probes of those
functionals are the decisive correctness test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .density import PDF_FLOOR, TargetModel, kde_raw
from .fields import (FeatureImage, ScalarField, delta_eps, delta_eps_prime,
                     laplacian_array, smoothed_heaviside)


@dataclass(frozen=True)
class VelocityDiagnostics:
    B: float = float("nan")
    factors: tuple[float, ...] = field(default_factory=tuple)
    B_kappa: float = float("nan")
    area: float = float("nan")
    band_mass: float = float("nan")


def correlate_bins(values: np.ndarray, kernel_samples: np.ndarray,
                   dz: float) -> np.ndarray:
    """out[j] = sum_m values[j+m] * kernel_samples[M+m] * dz, replicate-padded;
    this is the quadrature of integral values(xi) k(xi - z) dxi on the grid.
    Identical to convolution for symmetric kernels."""
    m = (len(kernel_samples) - 1) // 2
    padded = np.pad(values, m, mode="edge")
    return np.convolve(padded, kernel_samples[::-1], mode="valid") * dz


def _eval_on_pixels(grid_values: np.ndarray, centers: np.ndarray,
                    pixel_values: np.ndarray) -> np.ndarray:
    """Cubic-spline evaluation of a bin-grid function at pixel values, clamped
    to the grid ends."""
    spline = CubicSpline(centers, grid_values)
    clamped = np.clip(pixel_values, centers[0], centers[-1])
    return spline(clamped)


def _interior_weight(phi: np.ndarray, eps: float) -> np.ndarray:
    return np.asarray(smoothed_heaviside(-phi, eps))


def _bhatt(target_values: np.ndarray, raw: np.ndarray, dz: float,
           floored: bool) -> float:
    if floored:
        prod = (target_values + PDF_FLOOR) * (raw + PDF_FLOOR)
    else:
        prod = target_values * raw
    return float(np.trapezoid(np.sqrt(prod), dx=dz))


def _feature_pdfs_raw(features: FeatureImage, weight: np.ndarray,
                      model: TargetModel) -> list[np.ndarray]:
    return [
        kde_raw(features.channels[k].data, weight, model.feature_kernels[k],
                model.feature_pdfs[k].grid)
        for k in range(model.d)
    ]


def photometric_bhattacharyya(features: FeatureImage, phi: ScalarField,
                              model: TargetModel, eps: float = 2.0,
                              floored: bool = False) -> tuple[float, list[float]]:
    """Product Bhattacharyya between the target pdfs and the empirical pdfs of
    the smoothed interior region; returns (B, per-feature factors)."""
    w = _interior_weight(phi.data, eps)
    raws = _feature_pdfs_raw(features, w, model)
    factors = [
        _bhatt(model.feature_pdfs[k].values, raws[k], model.feature_pdfs[k].dz,
               floored)
        for k in range(model.d)
    ]
    return float(np.prod(factors)), factors


def velocity_photometric(features: FeatureImage, phi: ScalarField,
                         model: TargetModel,
                         eps: float = 2.0) -> tuple[ScalarField, VelocityDiagnostics]:
    """Distribution-matching velocity over the image features.

    V(x) = (1/2A) sum_k alpha_k (B_k - [r_k * K](I_k(x))) with
    r_k = sqrt(target_k / empirical_k) (floored), A the smoothed interior mass,
    alpha_k the product of the other factors.
    """
    if features.d != model.d:
        raise ValueError(f"model has d={model.d}, features have d={features.d}")
    if features.shape != phi.shape:
        raise ValueError("features and phi shapes differ")
    if not np.any(phi.data <= 0):
        raise ValueError("empty interior: phi is positive everywhere")

    w = _interior_weight(phi.data, eps)
    area = float(w.sum())
    raws = _feature_pdfs_raw(features, w, model)

    factors = []
    conv_fields = []
    for k in range(model.d):
        target = model.feature_pdfs[k]
        raw = raws[k]
        factors.append(_bhatt(target.values, raw, target.dz, floored=False))
        ratio = np.sqrt((target.values + PDF_FLOOR) / (raw + PDF_FLOOR))
        kern = model.feature_kernels[k].samples(target.dz)
        conv = correlate_bins(ratio, kern, target.dz)
        conv_fields.append(
            _eval_on_pixels(conv, target.centers, features.channels[k].data)
        )

    total = np.zeros(phi.shape)
    for k in range(model.d):
        alpha_k = float(np.prod([f for i, f in enumerate(factors) if i != k]))
        total += alpha_k * (factors[k] - conv_fields[k])
    v = total / (2.0 * area)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite photometric velocity")

    diag = VelocityDiagnostics(
        B=float(np.prod(factors)),
        factors=tuple(factors),
        area=float(np.count_nonzero(phi.data <= 0)),
        band_mass=float(np.asarray(delta_eps(phi.data, eps)).sum()),
    )
    return phi.like(v), diag


def shape_bhattacharyya(phi: ScalarField, kappa: ScalarField, model: TargetModel,
                        eps: float = 2.0, floored: bool = False) -> float:
    """Bhattacharyya between the target curvature pdf and the band-weighted
    empirical curvature pdf."""
    w = np.asarray(delta_eps(phi.data, eps))
    target = model.curvature_pdf
    raw = kde_raw(kappa.data, w, model.curvature_kernel, target.grid)
    return _bhatt(target.values, raw, target.dz, floored)


def velocity_shape(phi: ScalarField, kappa: ScalarField, model: TargetModel,
                   eps: float = 2.0) -> tuple[ScalarField, VelocityDiagnostics]:
    """Curvature-distribution (shape prior) velocity.

    V(x) = (1/2A)[ -Lap(delta_eps(phi) * [L * K'](kappa))
                   + delta_eps'(phi) ([L * K](kappa) - B_kappa) ]
    with L = sqrt(target / empirical) on the curvature bin grid (floored) and
    A the band mass. The curvature-integral term commutes with the spatial
    Laplacian, which is why a single bin-grid quadrature per pixel suffices.
    The sign of the Laplacian term follows the interior-negative, disk-positive
    curvature convention.
    """
    if kappa.shape != phi.shape:
        raise ValueError("kappa and phi shapes differ")
    w = np.asarray(delta_eps(phi.data, eps))
    mass = float(w.sum())
    if mass <= 0:
        raise ValueError("empty band: no pixels with |phi| < eps")

    target = model.curvature_pdf
    kern = model.curvature_kernel
    raw = kde_raw(kappa.data, w, kern, target.grid)
    b_kappa = _bhatt(target.values, raw, target.dz, floored=False)
    ratio = np.sqrt((target.values + PDF_FLOOR) / (raw + PDF_FLOOR))

    conv_k = correlate_bins(ratio, kern.samples(target.dz), target.dz)
    conv_kprime = correlate_bins(ratio, kern.derivative_samples(target.dz),
                                 target.dz)

    lk = _eval_on_pixels(conv_k, target.centers, kappa.data)
    lkp = _eval_on_pixels(conv_kprime, target.centers, kappa.data)
    t1 = laplacian_array(w * lkp, phi.spacing)
    dprime = np.asarray(delta_eps_prime(phi.data, eps))
    v = (-t1 + dprime * (lk - b_kappa)) / (2.0 * mass)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite shape velocity")

    diag = VelocityDiagnostics(
        B_kappa=b_kappa,
        area=float(np.count_nonzero(phi.data <= 0)),
        band_mass=mass,
    )
    return phi.like(v), diag
