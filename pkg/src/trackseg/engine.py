"""End-to-end segmentation: feature extraction, the iteration loop combining
photometric, shape, and geodesic forces, convergence, and result emission."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .density import TargetModel, train_target
from .fields import FeatureImage, ScalarField, delta_eps
from .filters import SradParams, edge_detector, srad, tangent_regularize
from .levelset import (LevelSet, aos_geodesic_step, curvature, redistance,
                       signed_distance_from_mask)
from .velocity import velocity_photometric, velocity_shape


@dataclass(frozen=True)
class SegParams:
    """All run constants of the segmentation procedure."""

    alpha: float = 0.5          # photometric weight
    beta: float = 2.5           # shape-prior weight; 0 disables the prior
    eps: float = 2.0            # smoothed-delta support half-width
    shape_eps: float | None = None  # band half-width of the curvature pdf/velocity
    lam: float = 3.0            # edge-detector steepness
    gamma: float = 0.1          # across-level-set diffusivity of the regularizer
    reg_iters: int = 4          # tangent-regularizer iterations
    reg_dtau: float = 10.0      # tangent-regularizer time step
    dt: float = 1.0             # explicit step for the data velocities
    aos_dt: float = 10.0        # implicit geodesic step
    conv_tol: float = 1e-4      # band-mean |phi change| threshold
    max_iters: int = 500
    redist_every: int = 1       # redistance cadence (iterations per rebuild)
    tensor_smoothing: float = 2.0
    band_form: str = "delta"    # "delta": literal grouping; "unit": |grad phi|~1 variant
    srad: SradParams = field(default_factory=SradParams)

    def __post_init__(self):
        positive = {
            "alpha": self.alpha, "eps": self.eps, "lam": self.lam,
            "gamma": self.gamma, "reg_dtau": self.reg_dtau, "dt": self.dt,
            "aos_dt": self.aos_dt, "conv_tol": self.conv_tol,
            "tensor_smoothing": self.tensor_smoothing,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.conv_tol >= 1:
            raise ValueError("conv_tol must be below 1")
        if self.reg_iters < 1:
            raise ValueError("reg_iters must be at least 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.redist_every < 1:
            raise ValueError("redist_every must be at least 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if self.band_form not in ("delta", "unit"):
            raise ValueError("band_form must be 'delta' or 'unit'")
        if self.shape_eps is not None and self.shape_eps <= 0:
            raise ValueError("shape_eps must be positive")

    @property
    def shape_band(self) -> float:
        return self.eps if self.shape_eps is None else self.shape_eps

    def with_overrides(self, **kwargs) -> "SegParams":
        return replace(self, **kwargs)


@dataclass
class TraceRow:
    iteration: int
    B: float
    B_kappa: float
    delta: float
    area: float


@dataclass
class SegResult:
    levelset: LevelSet
    mask: ScalarField
    iterations: int
    trace: list[TraceRow]
    converged: bool
    failed: bool = False
    failure_reason: str = ""


def extract_features(u: ScalarField, params: SegParams) -> FeatureImage:
    """Feature stack: the raw envelope image and its despeckled version."""
    return FeatureImage([u, srad(u, params.srad)])


def default_init(u: ScalarField) -> LevelSet:
    """Signed distance of a centered disk of radius min(rows, cols)/4."""
    r = 0.25 * min(u.rows, u.cols)
    cy, cx = u.rows / 2.0, u.cols / 2.0
    yy, xx = np.mgrid[0 : u.rows, 0 : u.cols]
    phi = np.hypot(yy - cy, xx - cx) - r
    return LevelSet(u.like(phi))


def segment(u: ScalarField, model: TargetModel, phi0: LevelSet,
            params: SegParams,
            features: FeatureImage | None = None) -> SegResult:
    """Run the full iteration loop from phi0 until the band-mean change of phi
    falls below conv_tol or max_iters is reached.

    Pass `features` to reuse a precomputed feature stack (it must come from
    `extract_features` on the same image).
    """
    if features is None:
        features = extract_features(u, params)
    g = edge_detector(features.channels[1], params.lam)

    ls = phi0
    trace: list[TraceRow] = []
    converged = False
    for it in range(params.max_iters):
        phi_prev = ls.phi.data

        if params.beta > 0:
            phi_reg = tangent_regularize(
                ls.phi, params.gamma, params.reg_iters, params.reg_dtau,
                params.tensor_smoothing,
            )
            kappa = curvature(phi_reg)
            v_shape, diag_shape = velocity_shape(ls.phi, kappa, model,
                                                 params.shape_band)
            b_kappa = diag_shape.B_kappa
            shape_term = params.beta * v_shape.data
        else:
            b_kappa = math.nan
            shape_term = 0.0

        v_photo, diag = velocity_photometric(features, ls.phi, model, params.eps)
        if params.band_form == "delta":
            photo_term = delta_eps(phi_prev, params.eps) * params.alpha * v_photo.data
        else:
            photo_term = params.alpha * v_photo.data

        phi_new = phi_prev + params.dt * (photo_term + shape_term)
        if not np.all(np.isfinite(phi_new)):
            raise RuntimeError(f"non-finite level-set update at iteration {it}")
        stepped = aos_geodesic_step(ls.phi.like(phi_new), g, params.aos_dt)

        try:
            if (it + 1) % params.redist_every == 0:
                ls = redistance(LevelSet(stepped, params.eps))
            else:
                if not (np.any(stepped.data <= 0) and np.any(stepped.data > 0)):
                    raise ValueError("contour vanished: phi has no sign change")
                ls = LevelSet(stepped, params.eps)
        except ValueError as exc:
            trace.append(TraceRow(it, diag.B, b_kappa, math.nan, diag.area))
            return SegResult(
                levelset=LevelSet(stepped, params.eps),
                mask=stepped.like((stepped.data <= 0).astype(np.float64)),
                iterations=it + 1,
                trace=trace,
                converged=False,
                failed=True,
                failure_reason=str(exc),
            )

        band = np.abs(phi_prev) <= 2.0 * params.eps
        delta = float(np.mean(np.abs(ls.phi.data[band] - phi_prev[band])))
        trace.append(TraceRow(it, diag.B, b_kappa, delta, float(ls.interior_area())))
        if delta <= params.conv_tol:
            converged = True
            break

    if params.redist_every > 1 and trace:
        ls = redistance(ls)
    return SegResult(
        levelset=ls,
        mask=ls.mask(),
        iterations=len(trace),
        trace=trace,
        converged=converged,
    )


def train_model(pairs: list[tuple[ScalarField, ScalarField]],
                params: SegParams) -> TargetModel:
    """Train a TargetModel from (envelope image, binary mask) pairs using the
    same feature extractor and curvature pipeline the segmentation loop uses."""
    training = []
    for u, mask in pairs:
        features = extract_features(u, params)
        ls = signed_distance_from_mask(mask)
        phi_reg = tangent_regularize(
            ls.phi, params.gamma, params.reg_iters, params.reg_dtau,
            params.tensor_smoothing,
        )
        kappa = curvature(phi_reg)
        training.append((features, mask, phi_reg, kappa))
    return train_target(
        training, eps=params.shape_band, region_eps=params.eps,
        feature_names=["gray_level", "despeckled"],
    )
