"""Kernel density estimation over regions and level-set bands, Bhattacharyya
coefficients, and training of the target model from delineated examples."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fields import FeatureImage, ScalarField, delta_eps, smoothed_heaviside

#: probability floor applied to pdf bins before forming ratios
PDF_FLOOR = 1e-12

#: kernel support truncation, in bandwidths; 6 keeps the discrete kernel mass
#: and the discrete integral of K' below 1e-8 of their continuum values
KERNEL_TRUNC = 6.0


@dataclass(frozen=True)
class KernelSpec:
    """Smoothing kernel for the density estimates. Only Gaussian is supported."""

    kind: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported kernel kind: {self.kind!r}")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    def evaluate(self, u):
        """K(u), truncated to |u| <= KERNEL_TRUNC bandwidths."""
        h = self.bandwidth
        u = np.asarray(u, dtype=np.float64)
        out = np.where(
            np.abs(u) <= KERNEL_TRUNC * h,
            np.exp(-0.5 * (u / h) ** 2) / (h * np.sqrt(2.0 * np.pi)),
            0.0,
        )
        return out if out.ndim else float(out)

    def derivative(self, u):
        """K'(u) = -(u/h^2) K(u)."""
        u = np.asarray(u, dtype=np.float64)
        out = -u / self.bandwidth**2 * self.evaluate(u)
        return out if out.ndim else float(out)

    def samples(self, dz: float) -> np.ndarray:
        """Kernel sampled on a symmetric grid of step dz, normalized to sum*dz = 1."""
        m = int(np.ceil(KERNEL_TRUNC * self.bandwidth / dz))
        u = np.arange(-m, m + 1) * dz
        k = self.evaluate(u)
        return k / (k.sum() * dz)

    def derivative_samples(self, dz: float) -> np.ndarray:
        m = int(np.ceil(KERNEL_TRUNC * self.bandwidth / dz))
        u = np.arange(-m, m + 1) * dz
        return np.asarray(self.derivative(u))


@dataclass(frozen=True)
class BinGrid:
    """Uniform sampling grid for 1-D densities; endpoints inclusive."""

    z_min: float
    z_max: float
    n_bins: int = 128

    def __post_init__(self):
        if self.n_bins < 16:
            raise ValueError("n_bins must be at least 16")
        if not self.z_max > self.z_min:
            raise ValueError("z_max must exceed z_min")

    @property
    def centers(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.n_bins)

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / (self.n_bins - 1)


@dataclass(frozen=True)
class Pdf1D:
    """Sampled probability density on a uniform bin grid."""

    z_min: float
    z_max: float
    n_bins: int
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.n_bins < 16 or not self.z_max > self.z_min:
            raise ValueError("invalid bin grid")
        if v.shape != (self.n_bins,):
            raise ValueError(f"values shape {v.shape} != ({self.n_bins},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("pdf values must be finite")
        if np.any(v < -1e-12):
            raise ValueError("pdf values must be non-negative")
        object.__setattr__(self, "values", np.maximum(v, 0.0))

    @property
    def grid(self) -> BinGrid:
        return BinGrid(self.z_min, self.z_max, self.n_bins)

    @property
    def centers(self) -> np.ndarray:
        return self.grid.centers

    @property
    def dz(self) -> float:
        return self.grid.dz

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.dz))

    def normalized(self) -> "Pdf1D":
        total = self.integral()
        if total <= 0:
            raise ValueError("cannot normalize a zero pdf")
        return Pdf1D(self.z_min, self.z_max, self.n_bins, self.values / total)

    def same_grid(self, other: "Pdf1D") -> bool:
        return (
            self.n_bins == other.n_bins
            and np.isclose(self.z_min, other.z_min, rtol=0, atol=1e-12)
            and np.isclose(self.z_max, other.z_max, rtol=0, atol=1e-12)
        )


def kde_raw(values: np.ndarray, weights: np.ndarray, kernel: KernelSpec,
            bins: BinGrid) -> np.ndarray:
    """Weighted KDE on the bin grid, without post-normalization:
    p_j = sum_x w(x) K(z_j - v(x)) / sum_x w(x)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if values.shape != weights.shape:
        raise ValueError("values and weights must have identical shapes")
    keep = weights > 0
    total = float(weights[keep].sum())
    if total <= 0:
        raise ValueError("empty region: weight field has zero total mass")
    v = values[keep]
    w = weights[keep]
    centers = bins.centers
    n_bins = bins.n_bins
    dz = (bins.z_max - bins.z_min) / (n_bins - 1)
    half = int(np.ceil(KERNEL_TRUNC * kernel.bandwidth / dz)) + 1
    out = np.zeros(n_bins)
    if 2 * half + 1 >= n_bins:
        # kernel support spans the grid: dense evaluation is cheaper
        step = max(1, 2_000_000 // n_bins)
        for s in range(0, v.size, step):
            diff = centers[:, None] - v[None, s : s + step]
            out += np.asarray(kernel.evaluate(diff)) @ w[s : s + step]
        return out / total
    # banded accumulation: only bins within the truncated kernel support of
    # each value contribute, which `evaluate` makes exactly equivalent to the
    # dense product
    base = np.floor((v - bins.z_min) / dz).astype(np.int64)
    for m in range(-half, half + 2):
        j = base + m
        valid = (j >= 0) & (j < n_bins)
        if not np.any(valid):
            continue
        jv = j[valid]
        k = np.asarray(kernel.evaluate(centers[jv] - v[valid]))
        out += np.bincount(jv, weights=w[valid] * k, minlength=n_bins)
    return out / total


def kde_region(channel: ScalarField, region_indicator: ScalarField,
               kernel: KernelSpec, bins: BinGrid) -> Pdf1D:
    """Empirical pdf of a channel over a weighted region, renormalized on the grid."""
    if channel.shape != region_indicator.shape:
        raise ValueError("channel and region indicator shapes differ")
    if np.any(region_indicator.data < 0):
        raise ValueError("region indicator must be non-negative")
    raw = kde_raw(channel.data, region_indicator.data, kernel, bins)
    return Pdf1D(bins.z_min, bins.z_max, bins.n_bins, raw).normalized()


def kde_curvature_band(kappa: ScalarField, phi: ScalarField, eps: float,
                       kernel: KernelSpec, bins: BinGrid) -> Pdf1D:
    """Curvature pdf in the vicinity of the zero level set, weighted by delta_eps(phi)."""
    if kappa.shape != phi.shape:
        raise ValueError("kappa and phi shapes differ")
    w = delta_eps(phi.data, eps)
    if not np.any(w > 0):
        raise ValueError("empty band: no pixels with |phi| < eps")
    raw = kde_raw(kappa.data, w, kernel, bins)
    return Pdf1D(bins.z_min, bins.z_max, bins.n_bins, raw).normalized()


def bhattacharyya(p: Pdf1D, q: Pdf1D) -> float:
    """Trapezoidal integral of sqrt(p*q); 1 iff the densities coincide bin-wise."""
    if not p.same_grid(q):
        raise ValueError("bin grids differ")
    return float(np.trapezoid(np.sqrt(p.values * q.values), dx=p.dz))


def joint_bhattacharyya(model: "TargetModel",
                        empirical: list[Pdf1D]) -> tuple[float, list[float]]:
    """Product Bhattacharyya over independent feature factors, plus the factors."""
    if len(empirical) != len(model.feature_pdfs):
        raise ValueError(
            f"expected {len(model.feature_pdfs)} empirical pdfs, got {len(empirical)}"
        )
    factors = [bhattacharyya(pt, pe) for pt, pe in zip(model.feature_pdfs, empirical)]
    return float(np.prod(factors)), factors


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule of thumb; falls back to a small positive width for
    (near-)constant samples."""
    v = np.asarray(values, dtype=np.float64).ravel()
    n = max(v.size, 2)
    sigma = float(np.std(v))
    q75, q25 = np.percentile(v, [75, 25])
    iqr = float(q75 - q25)
    scale = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    if scale <= 0:
        scale = max(abs(float(np.mean(v))), 1.0) * 1e-2
    return 0.9 * scale * n ** (-0.2)


@dataclass(frozen=True)
class TargetModel:
    """Trained bundle of per-feature target pdfs and the curvature target pdf.

    Each pdf carries its own kernel: feature bandwidths live on the intensity
    scale while the curvature bandwidth is in 1/pixel units.
    """

    feature_pdfs: list[Pdf1D]
    curvature_pdf: Pdf1D
    feature_kernels: list[KernelSpec]
    curvature_kernel: KernelSpec
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.feature_pdfs) < 1:
            raise ValueError("model needs at least one feature pdf")
        if len(self.feature_kernels) != len(self.feature_pdfs):
            raise ValueError("one kernel per feature pdf required")
        for pdf in [*self.feature_pdfs, self.curvature_pdf]:
            if abs(pdf.integral() - 1.0) > 1e-6:
                raise ValueError("model pdfs must integrate to 1")
        if not self.feature_names:
            object.__setattr__(
                self,
                "feature_names",
                [f"feature_{k}" for k in range(len(self.feature_pdfs))],
            )

    @property
    def d(self) -> int:
        return len(self.feature_pdfs)

    def to_json(self) -> str:
        def pdf_doc(p: Pdf1D):
            return {
                "z_min": p.z_min,
                "z_max": p.z_max,
                "n_bins": p.n_bins,
                "values": [float(f"{v:.17g}") for v in p.values],
            }

        doc = {
            "version": 1,
            "feature_kernels": [
                {"kind": k.kind, "bandwidth": k.bandwidth} for k in self.feature_kernels
            ],
            "curvature_kernel": {
                "kind": self.curvature_kernel.kind,
                "bandwidth": self.curvature_kernel.bandwidth,
            },
            "feature_pdfs": [pdf_doc(p) for p in self.feature_pdfs],
            "curvature_pdf": pdf_doc(self.curvature_pdf),
            "feature_names": list(self.feature_names),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TargetModel":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported model version: {doc.get('version')}")

        def pdf_from(d):
            return Pdf1D(d["z_min"], d["z_max"], d["n_bins"], np.asarray(d["values"]))

        return cls(
            feature_pdfs=[pdf_from(d) for d in doc["feature_pdfs"]],
            curvature_pdf=pdf_from(doc["curvature_pdf"]),
            feature_kernels=[
                KernelSpec(k["kind"], k["bandwidth"]) for k in doc["feature_kernels"]
            ],
            curvature_kernel=KernelSpec(
                doc["curvature_kernel"]["kind"], doc["curvature_kernel"]["bandwidth"]
            ),
            feature_names=list(doc["feature_names"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "TargetModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


#: default grid for curvature pdfs, in 1/pixel units
CURVATURE_BINS = BinGrid(-0.5, 0.5, 128)
#: default kernel bandwidth for curvature pdfs
CURVATURE_BANDWIDTH = 0.05
#: bin-grid margin around the training pool, in bandwidths; covers the full
#: truncated kernel support so normalized pdfs hold their mass on the grid
BIN_MARGIN = KERNEL_TRUNC


def feature_bins_from_pool(pool: np.ndarray, bandwidth: float,
                           n_bins: int = 128) -> BinGrid:
    lo = float(np.min(pool)) - BIN_MARGIN * bandwidth
    hi = float(np.max(pool)) + BIN_MARGIN * bandwidth
    return BinGrid(lo, hi, n_bins)


def train_target(
    training: list[tuple[FeatureImage, ScalarField, ScalarField, ScalarField]],
    eps: float = 2.0,
    n_bins: int = 128,
    curvature_kernel: KernelSpec | None = None,
    curvature_bins: BinGrid = CURVATURE_BINS,
    feature_names: list[str] | None = None,
    region_eps: float | None = None,
) -> TargetModel:
    """Train a TargetModel from (features, binary mask, regularized phi, kappa) tuples.

    Feature pdfs are the renormalized mean over training images of masked KDEs;
    the curvature pdf is the renormalized mean of the band KDEs. Feature
    bandwidths follow Silverman's rule on the pooled masked values; the shared
    feature bin grids span the pool plus a full kernel support margin.

    With `region_eps` set, feature pdfs weight pixels by the smoothed Heaviside
    of the signed distance to the mask boundary instead of the sharp mask, so
    that training and segmentation-time empirical pdfs see the same boundary
    mixture.
    """
    if len(training) < 1:
        raise ValueError("need at least one training pair")
    d = training[0][0].d
    if curvature_kernel is None:
        curvature_kernel = KernelSpec("gaussian", CURVATURE_BANDWIDTH)

    for idx, (features, mask, _phi, _kappa) in enumerate(training):
        if features.d != d:
            raise ValueError(f"training pair {idx}: channel count {features.d} != {d}")
        vals = np.unique(mask.data)
        if not np.all(np.isin(vals, [0.0, 1.0])):
            raise ValueError(f"training pair {idx}: mask is not binary")
        if not np.any(mask.data > 0):
            raise ValueError(f"training pair {idx}: empty mask")

    feature_kernels: list[KernelSpec] = []
    feature_grids: list[BinGrid] = []
    for k in range(d):
        pool = np.concatenate(
            [f.channels[k].data[m.data > 0] for f, m, _p, _k2 in training]
        )
        h = silverman_bandwidth(pool)
        feature_kernels.append(KernelSpec("gaussian", h))
        feature_grids.append(feature_bins_from_pool(pool, h, n_bins))

    feature_pdfs: list[Pdf1D] = []
    for k in range(d):
        acc = np.zeros(n_bins)
        for features, mask, phi, _kappa in training:
            if region_eps is None:
                weights = mask
            else:
                weights = phi.like(smoothed_heaviside(-phi.data, region_eps))
            pdf = kde_region(features.channels[k], weights, feature_kernels[k],
                             feature_grids[k])
            acc += pdf.values
        mean = Pdf1D(feature_grids[k].z_min, feature_grids[k].z_max, n_bins,
                     acc / len(training))
        feature_pdfs.append(mean.normalized())

    acc = np.zeros(curvature_bins.n_bins)
    for features, _mask, phi, kappa in training:
        pdf = kde_curvature_band(kappa, phi, eps, curvature_kernel, curvature_bins)
        acc += pdf.values
    curvature_pdf = Pdf1D(
        curvature_bins.z_min, curvature_bins.z_max, curvature_bins.n_bins,
        acc / len(training),
    ).normalized()

    return TargetModel(
        feature_pdfs=feature_pdfs,
        curvature_pdf=curvature_pdf,
        feature_kernels=feature_kernels,
        curvature_kernel=curvature_kernel,
        feature_names=feature_names or [],
    )
