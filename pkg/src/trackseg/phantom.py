"""Synthetic TRUS-style phantom generation: gland-like amplitude profiles with
elastic deformation, speckle-bearing reflectivity, PSF convolution, envelope
detection, and shadowing sectors."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_erosion, gaussian_filter, label, zoom
from scipy.signal import fftconvolve, hilbert

from .fields import ScalarField
from .fileio import read_grd1, read_mask_pgm, write_grd1, write_mask_pgm


@dataclass(frozen=True)
class PhantomSpec:
    rows: int = 128
    cols: int = 128
    contrast_ratio: float = 3.0
    # profile: base ellipse semi-axes as fractions of min(rows, cols), plus the
    # relative amplitude of the low-order boundary lobes
    semi_axes: tuple[float, float] = (0.26, 0.21)
    lobe_amplitude: float = 0.03
    center_jitter: float = 3.0
    # elastic deformation
    control_grid: int = 5
    max_displacement: float = 3.0
    # capsule: a brighter band along the inside of the gland boundary, so the
    # gland's intensity distribution is not scale-invariant (a strict subset of
    # the gland lacks the capsule mode, which gives the region term a genuine
    # outward pull toward the full boundary)
    rim_width: int = 7               # px, measured inward from the boundary
    rim_gain: float = 2.0            # capsule amplitude relative to the interior
    rim_offset: int = 3              # px between the boundary and the capsule
    # shadowing sectors anchored at the transducer (bottom center)
    n_shadows: int = 2
    shadow_width: float = 0.25       # radians
    shadow_depth: float = 5.0        # px the sector reaches past the boundary
    attenuation: float = 0.8         # multiplies by (1 - attenuation) inside
    # separable synthetic point spread function
    psf_center_freq: float = 0.25    # cycles/px, axial
    psf_axial_sigma: float = 1.5     # px
    psf_lateral_sigma: float = 1.4   # px
    seed: int = 0

    def __post_init__(self):
        if self.rows < 32 or self.cols < 32:
            raise ValueError("phantom grid must be at least 32x32")
        if self.contrast_ratio <= 1:
            raise ValueError("contrast_ratio must exceed 1")
        if self.max_displacement >= min(self.rows, self.cols) / 8:
            raise ValueError("max_displacement must stay below min(rows, cols)/8")
        if not 0 <= self.attenuation < 1:
            raise ValueError("attenuation must be in [0, 1)")
        if not (0 < self.semi_axes[0] < 0.5 and 0 < self.semi_axes[1] < 0.5):
            raise ValueError("semi-axes must be fractions in (0, 0.5)")
        if self.n_shadows < 0:
            raise ValueError("n_shadows must be non-negative")
        if self.shadow_depth < 0:
            raise ValueError("shadow_depth must be non-negative")
        if self.rim_width < 0:
            raise ValueError("rim_width must be non-negative")
        if self.rim_offset < 0:
            raise ValueError("rim_offset must be non-negative")
        if self.rim_gain < 1:
            raise ValueError("rim_gain must be at least 1")


@dataclass(frozen=True)
class PhantomSample:
    envelope: ScalarField
    truth_mask: ScalarField
    rf: ScalarField
    reflectivity: ScalarField  # pre-PSF scatterer field (carries the variance ratio)
    shadow: ScalarField  # multiplicative attenuation applied to the reflectivity


def _profile_implicit(spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    """Implicit inside-function of a perturbed ellipse (positive inside)."""
    scale = min(spec.rows, spec.cols)
    a = spec.semi_axes[0] * scale
    b = spec.semi_axes[1] * scale
    cy = spec.rows / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter)
    cx = spec.cols / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter)
    tilt = rng.uniform(0, np.pi)
    amps = rng.uniform(0.3, 1.0, size=3) * spec.lobe_amplitude
    phases = rng.uniform(0, 2 * np.pi, size=3)

    yy, xx = np.mgrid[0 : spec.rows, 0 : spec.cols].astype(np.float64)
    dy = yy - cy
    dx = xx - cx
    ct, st = np.cos(tilt), np.sin(tilt)
    ex = ct * dx + st * dy
    ey = -st * dx + ct * dy
    radius = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    ellipse_r = a * b / np.sqrt((b * np.cos(np.arctan2(ey, ex))) ** 2
                                + (a * np.sin(np.arctan2(ey, ex))) ** 2)
    lobes = sum(
        amp * np.cos((m + 2) * theta + ph)
        for m, (amp, ph) in enumerate(zip(amps, phases))
    )
    return ellipse_r * (1.0 + lobes) - radius


def _displacement(spec: PhantomSpec, rng: np.random.Generator):
    """Smooth random displacement field with bounded magnitude."""
    cg = spec.control_grid
    coarse = rng.standard_normal((2, cg, cg))
    fy = zoom(coarse[0], (spec.rows / cg, spec.cols / cg), order=3)
    fx = zoom(coarse[1], (spec.rows / cg, spec.cols / cg), order=3)
    mag = np.hypot(fx, fy).max()
    if mag <= 0:
        return np.zeros((spec.rows, spec.cols)), np.zeros((spec.rows, spec.cols))
    target = spec.max_displacement * rng.uniform(0.6, 1.0)
    return fy / mag * target, fx / mag * target


def _warp(field: np.ndarray, disp_y: np.ndarray, disp_x: np.ndarray) -> np.ndarray:
    from scipy.ndimage import map_coordinates

    yy, xx = np.mgrid[0 : field.shape[0], 0 : field.shape[1]].astype(np.float64)
    return map_coordinates(field, [yy - disp_y, xx - disp_x], order=1,
                           mode="nearest")


def _jacobian_positive(disp_y: np.ndarray, disp_x: np.ndarray) -> bool:
    dyy, dyx = np.gradient(disp_y)
    dxy, dxx = np.gradient(disp_x)
    det = (1.0 + dxx) * (1.0 + dyy) - dxy * dyx
    return bool(np.all(det > 0))


def _shadow_mask(spec: PhantomSpec, mask: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """Multiplicative attenuation field: sectors from the bottom-center anchor
    aimed at random boundary points, smoothed at the angular edges."""
    if spec.n_shadows == 0 or spec.attenuation == 0:
        return np.ones_like(mask, dtype=np.float64)
    anchor_y = spec.rows - 1.0
    anchor_x = spec.cols / 2.0
    yy, xx = np.mgrid[0 : spec.rows, 0 : spec.cols].astype(np.float64)
    angles = np.arctan2(anchor_y - yy, xx - anchor_x)  # 0..pi upward
    radii = np.hypot(anchor_y - yy, xx - anchor_x)
    out = np.ones((spec.rows, spec.cols))
    # boundary pixels of the mask
    from .fileio import contour_pixels

    by, bx = np.nonzero(contour_pixels(np.where(mask, -1.0, 1.0)))
    # aim at the half of the boundary facing away from the transducer so the
    # sector breaks the apparent far boundary instead of blanketing the object
    cy = np.nonzero(mask)[0].mean()
    distal = by <= cy
    if np.any(distal):
        by, bx = by[distal], bx[distal]
    for _ in range(spec.n_shadows):
        i = rng.integers(0, len(by))
        aim = np.arctan2(anchor_y - by[i], bx[i] - anchor_x)
        # shadow begins just before the occluding boundary point and extends
        # away from the transducer, breaking the apparent boundary there
        r_start = np.hypot(anchor_y - by[i], bx[i] - anchor_x) - spec.shadow_depth
        sector = (np.abs(angles - aim) <= spec.shadow_width / 2.0) & (radii >= r_start)
        out = np.where(sector, 1.0 - spec.attenuation, out)
    return gaussian_filter(out, 1.5)


def _psf(spec: PhantomSpec) -> np.ndarray:
    ny = int(np.ceil(4 * spec.psf_axial_sigma))
    nx = int(np.ceil(4 * spec.psf_lateral_sigma))
    y = np.arange(-ny, ny + 1)[:, None]
    x = np.arange(-nx, nx + 1)[None, :]
    axial = np.cos(2 * np.pi * spec.psf_center_freq * y) * np.exp(
        -0.5 * (y / spec.psf_axial_sigma) ** 2
    )
    lateral = np.exp(-0.5 * (x / spec.psf_lateral_sigma) ** 2)
    psf = axial * lateral
    return psf / np.abs(psf).sum()


def _amplitude(spec: PhantomSpec, mask: np.ndarray) -> np.ndarray:
    """Scatterer amplitude: interior plus capsule, normalized so the mean
    squared amplitude (reflectivity variance) inside equals contrast_ratio."""
    if spec.rim_width > 0 and spec.rim_gain > 1:
        outer = (binary_erosion(mask, iterations=spec.rim_offset)
                 if spec.rim_offset > 0 else mask)
        core = binary_erosion(outer, iterations=spec.rim_width)
        rim = outer & ~core
    else:
        rim = np.zeros_like(mask)
    f_rim = rim.sum() / max(mask.sum(), 1)
    interior_var = spec.contrast_ratio / ((1.0 - f_rim) + f_rim * spec.rim_gain**2)
    amplitude = np.where(mask, np.sqrt(interior_var), 1.0)
    amplitude = np.where(rim, spec.rim_gain * np.sqrt(interior_var), amplitude)
    return gaussian_filter(amplitude, 0.8)


def generate(spec: PhantomSpec) -> PhantomSample:
    """Simulated RF image and envelope, deterministic given spec.seed."""
    rng = np.random.default_rng(spec.seed)
    area = spec.rows * spec.cols
    for _attempt in range(10):
        implicit = _profile_implicit(spec, rng)
        disp_y, disp_x = _displacement(spec, rng)
        if not _jacobian_positive(disp_y, disp_x):
            continue
        warped = _warp(implicit, disp_y, disp_x)
        mask = warped > 0
        frac = mask.sum() / area
        if not 0.05 <= frac <= 0.60:
            continue
        n_components = label(mask)[1]
        if n_components != 1:
            continue

        amplitude = _amplitude(spec, mask)
        shadow = _shadow_mask(spec, mask, rng)
        reflectivity = rng.standard_normal((spec.rows, spec.cols)) * amplitude
        reflectivity *= shadow
        rf = fftconvolve(reflectivity, _psf(spec), mode="same")
        envelope = np.abs(hilbert(rf, axis=0))
        return PhantomSample(
            envelope=ScalarField(envelope),
            truth_mask=ScalarField(mask.astype(np.float64)),
            rf=ScalarField(rf),
            reflectivity=ScalarField(reflectivity),
            shadow=ScalarField(shadow),
        )
    raise RuntimeError(f"degenerate phantom profile for seed {spec.seed}")


def generate_dataset(spec: PhantomSpec, n: int,
                     split: float = 0.5) -> tuple[list[PhantomSample], list[PhantomSample]]:
    """n samples with seeds spec.seed .. spec.seed+n-1; the first
    ceil(split*n) are the training set."""
    if n < 2:
        raise ValueError("need at least two samples")
    if not 0 < split < 1:
        raise ValueError("split must be in (0, 1)")
    samples = [
        generate(PhantomSpec(**{**asdict(spec), "seed": spec.seed + i}))
        for i in range(n)
    ]
    n_train = int(np.ceil(split * n))
    return samples[:n_train], samples[n_train:]


def write_dataset(out_dir, spec: PhantomSpec, train: list[PhantomSample],
                  test: list[PhantomSample]) -> None:
    """Layout: NNN_envelope.grd1 + NNN_mask.pgm per sample, plus manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = [*train, *test]
    for i, s in enumerate(samples):
        write_grd1(out / f"{i:03d}_envelope.grd1", s.envelope)
        write_mask_pgm(out / f"{i:03d}_mask.pgm", s.truth_mask)
    manifest = {
        "spec": {**asdict(spec), "semi_axes": list(spec.semi_axes)},
        "n": len(samples),
        "n_train": len(train),
        "seeds": [spec.seed + i for i in range(len(samples))],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))


def read_dataset(dataset_dir):
    """Returns (spec, train pairs, test pairs) of (envelope, mask) ScalarFields."""
    root = Path(dataset_dir)
    manifest = json.loads((root / "manifest.json").read_text())
    spec_doc = dict(manifest["spec"])
    spec_doc["semi_axes"] = tuple(spec_doc["semi_axes"])
    spec = PhantomSpec(**spec_doc)
    pairs = [
        (read_grd1(root / f"{i:03d}_envelope.grd1"),
         read_mask_pgm(root / f"{i:03d}_mask.pgm"))
        for i in range(manifest["n"])
    ]
    n_train = manifest["n_train"]
    return spec, pairs[:n_train], pairs[n_train:]


def sample_digest(sample: PhantomSample) -> str:
    h = hashlib.sha256()
    h.update(sample.envelope.data.tobytes())
    h.update(sample.truth_mask.data.tobytes())
    return h.hexdigest()
