"""Grid and image file formats: GRD1 binary grids, binary PGM masks/images, PPM overlays."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import ScalarField

_GRD1_MAGIC = b"GRD1"


def write_grd1(path, f: ScalarField) -> None:
    """GRD1: magic, LE u32 rows, u32 cols, f64 spacing, rows*cols LE f32 row-major."""
    with open(path, "wb") as fh:
        fh.write(_GRD1_MAGIC)
        fh.write(struct.pack("<IId", f.rows, f.cols, f.spacing))
        fh.write(f.data.astype("<f4").tobytes(order="C"))


def read_grd1(path) -> ScalarField:
    raw = Path(path).read_bytes()
    if raw[:4] != _GRD1_MAGIC:
        raise ValueError(f"{path}: not a GRD1 file")
    rows, cols, spacing = struct.unpack("<IId", raw[4:20])
    n = rows * cols
    data = np.frombuffer(raw[20 : 20 + 4 * n], dtype="<f4")
    if data.size != n:
        raise ValueError(f"{path}: truncated GRD1 payload")
    return ScalarField(data.reshape(rows, cols).astype(np.float64), spacing)


def write_pgm(path, f: ScalarField, vmax: float | None = None) -> None:
    """8-bit binary PGM. Values are scaled to [0, 255] by `vmax` (default: data max)."""
    a = f.data
    if vmax is None:
        vmax = float(a.max()) if a.max() > 0 else 1.0
    scaled = np.clip(a / vmax * 255.0, 0.0, 255.0)
    body = np.rint(scaled).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{f.cols} {f.rows}\n255\n".encode())
        fh.write(body.tobytes(order="C"))


def write_mask_pgm(path, mask: ScalarField) -> None:
    """Binary mask written as 0/255."""
    body = np.where(mask.data > 0.5, 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mask.cols} {mask.rows}\n255\n".encode())
        fh.write(body.tobytes(order="C"))


def read_pgm(path) -> ScalarField:
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    # Header = three whitespace-separated tokens after P5, comments allowed.
    tokens: list[int] = []
    i = 2
    while len(tokens) < 3:
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j : j + 1].isspace():
            j += 1
        tokens.append(int(raw[i:j]))
        i = j
    i += 1  # single whitespace after maxval
    cols, rows, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval={maxval})")
    data = np.frombuffer(raw[i : i + rows * cols], dtype=np.uint8)
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated PGM payload")
    return ScalarField(data.reshape(rows, cols).astype(np.float64))


def read_mask_pgm(path) -> ScalarField:
    f = read_pgm(path)
    return f.like((f.data > 127.5).astype(np.float64))


def write_overlay_ppm(path, image: ScalarField, contour: np.ndarray,
                      color: tuple[int, int, int] = (255, 64, 0)) -> None:
    """Grayscale image with a 1-px contour (boolean array) burned in, as binary PPM."""
    a = image.data
    vmax = float(a.max()) if a.max() > 0 else 1.0
    gray = np.rint(np.clip(a / vmax * 255.0, 0, 255)).astype(np.uint8)
    rgb = np.stack([gray, gray, gray], axis=-1)
    rgb[contour] = np.array(color, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{image.cols} {image.rows}\n255\n".encode())
        fh.write(rgb.tobytes(order="C"))


def contour_pixels(phi: np.ndarray) -> np.ndarray:
    """Pixels adjacent to a sign change of phi (inside pixels touching outside)."""
    inside = phi <= 0
    p = np.pad(inside, 1, mode="edge")
    nb_out = (~p[:-2, 1:-1]) | (~p[2:, 1:-1]) | (~p[1:-1, :-2]) | (~p[1:-1, 2:])
    return inside & nb_out
