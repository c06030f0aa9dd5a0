"""Signed-distance construction and reinitialization by fast marching,
level-set curvature, and the semi-implicit AOS step for the geodesic term."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .fields import ScalarField
from .numerics import aos_step

_FAR = 1e30


@njit(cache=True)
def _march(dist, state, h):
    """First-order 4-neighbor upwind fast marching from the frozen band.

    dist: initial distances (_FAR outside the band); state: 2 frozen, 0 far.
    Both are updated in place.
    """
    rows, cols = dist.shape
    cap = rows * cols * 4 + 4
    heap_d = np.empty(cap, dtype=np.float64)
    heap_i = np.empty(cap, dtype=np.int64)
    n = 0

    # seed the heap with the frozen band
    for i in range(rows):
        for j in range(cols):
            if state[i, j] == 2:
                heap_d[n] = dist[i, j]
                heap_i[n] = i * cols + j
                k = n
                n += 1
                while k > 0:
                    p = (k - 1) // 2
                    if heap_d[p] <= heap_d[k]:
                        break
                    heap_d[p], heap_d[k] = heap_d[k], heap_d[p]
                    heap_i[p], heap_i[k] = heap_i[k], heap_i[p]
                    k = p
                state[i, j] = 1  # re-freeze on pop

    while n > 0:
        d0 = heap_d[0]
        idx = heap_i[0]
        n -= 1
        heap_d[0] = heap_d[n]
        heap_i[0] = heap_i[n]
        k = 0
        while True:
            l = 2 * k + 1
            r = l + 1
            s = k
            if l < n and heap_d[l] < heap_d[s]:
                s = l
            if r < n and heap_d[r] < heap_d[s]:
                s = r
            if s == k:
                break
            heap_d[s], heap_d[k] = heap_d[k], heap_d[s]
            heap_i[s], heap_i[k] = heap_i[k], heap_i[s]
            k = s
        i = idx // cols
        j = idx % cols
        if state[i, j] == 2 or d0 > dist[i, j]:
            continue  # stale entry
        state[i, j] = 2

        for t in range(4):
            ni = i + (1 if t == 0 else -1 if t == 1 else 0)
            nj = j + (1 if t == 2 else -1 if t == 3 else 0)
            if ni < 0 or ni >= rows or nj < 0 or nj >= cols:
                continue
            if state[ni, nj] == 2:
                continue
            # upwind minima along each axis
            a = _FAR
            if ni > 0 and state[ni - 1, nj] == 2 and dist[ni - 1, nj] < a:
                a = dist[ni - 1, nj]
            if ni < rows - 1 and state[ni + 1, nj] == 2 and dist[ni + 1, nj] < a:
                a = dist[ni + 1, nj]
            b = _FAR
            if nj > 0 and state[ni, nj - 1] == 2 and dist[ni, nj - 1] < b:
                b = dist[ni, nj - 1]
            if nj < cols - 1 and state[ni, nj + 1] == 2 and dist[ni, nj + 1] < b:
                b = dist[ni, nj + 1]
            if a < _FAR and b < _FAR and abs(a - b) < h:
                d = 0.5 * (a + b + np.sqrt(2.0 * h * h - (a - b) * (a - b)))
            else:
                d = min(a, b) + h
            if d < dist[ni, nj]:
                dist[ni, nj] = d
                state[ni, nj] = 1
                heap_d[n] = d
                heap_i[n] = ni * cols + nj
                k = n
                n += 1
                while k > 0:
                    p = (k - 1) // 2
                    if heap_d[p] <= heap_d[k]:
                        break
                    heap_d[p], heap_d[k] = heap_d[k], heap_d[p]
                    heap_i[p], heap_i[k] = heap_i[k], heap_i[p]
                    k = p


def _interface_band(phi: np.ndarray, h: float):
    """Sub-cell distances at cells adjacent to a sign change of phi."""
    rows, cols = phi.shape
    dx = np.full((rows, cols), _FAR)
    dy = np.full((rows, cols), _FAR)
    absphi = np.abs(phi)

    def axis_cross(slice_a, slice_b, store):
        cross = phi[slice_a] * phi[slice_b] < 0
        denom = np.where(cross, absphi[slice_a] + absphi[slice_b], 1.0)
        frac = np.where(cross, absphi[slice_a] / denom * h, _FAR)
        store[slice_a] = np.minimum(store[slice_a], frac)

    axis_cross((slice(None), slice(0, -1)), (slice(None), slice(1, None)), dx)
    axis_cross((slice(None), slice(1, None)), (slice(None), slice(0, -1)), dx)
    axis_cross((slice(0, -1), slice(None)), (slice(1, None), slice(None)), dy)
    axis_cross((slice(1, None), slice(None)), (slice(0, -1), slice(None)), dy)

    both = (dx < _FAR) & (dy < _FAR)
    d = np.minimum(dx, dy)
    d[both] = dx[both] * dy[both] / np.hypot(dx[both], dy[both])
    d[phi == 0] = 0.0
    return d


def _redistance_array(phi: np.ndarray, h: float) -> np.ndarray:
    if not (np.any(phi > 0) and np.any(phi <= 0)):
        raise ValueError("contour vanished: phi has no sign change")
    d = _interface_band(phi, h)
    state = np.where(d < _FAR, 2, 0).astype(np.int8)
    dist = d.copy()
    _march(dist, state, h)
    sign = np.where(phi > 0, 1.0, -1.0)
    return sign * dist


@dataclass(frozen=True)
class LevelSet:
    """Signed-distance level-set function; phi <= 0 on the interior."""

    phi: ScalarField
    band_eps: float = 2.0

    def mask(self) -> ScalarField:
        return self.phi.like((self.phi.data <= 0).astype(np.float64))

    def interior_area(self) -> int:
        return int(np.count_nonzero(self.phi.data <= 0))


def signed_distance_from_mask(mask: ScalarField, band_eps: float = 2.0) -> LevelSet:
    """Signed Euclidean distance to the mask boundary, negative inside."""
    inside = mask.data > 0.5
    if not np.any(inside):
        raise ValueError("mask has no interior pixels")
    if np.all(inside):
        raise ValueError("mask has no exterior pixels")
    seed = np.where(inside, -1.0, 1.0)
    phi = _redistance_array(seed, mask.spacing)
    return LevelSet(mask.like(phi), band_eps)


def redistance(ls: LevelSet) -> LevelSet:
    """Rebuild the signed distance property, preserving the zero level set."""
    phi = _redistance_array(ls.phi.data, ls.phi.spacing)
    return LevelSet(ls.phi.like(phi), ls.band_eps)


def _second_derivatives(a: np.ndarray, h: float):
    p = np.pad(a, 1, mode="edge")
    fxx = (p[1:-1, 2:] - 2.0 * a + p[1:-1, :-2]) / (h * h)
    fyy = (p[2:, 1:-1] - 2.0 * a + p[:-2, 1:-1]) / (h * h)
    fxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4.0 * h * h)
    return fxx, fxy, fyy


def curvature_with_count(phi: ScalarField) -> tuple[ScalarField, int]:
    """Level-set curvature div(grad phi/|grad phi|) plus the count of pixels
    where the gradient was too degenerate to evaluate (set to zero there).

    Positive for the interior-negative signed distance of a disk (1/r on the
    circle)."""
    h = phi.spacing
    fy, fx = np.gradient(phi.data, h)
    fxx, fxy, fyy = _second_derivatives(phi.data, h)
    sq = fx * fx + fy * fy
    degenerate = sq < 1e-16
    denom = np.where(degenerate, 1.0, sq) ** 1.5
    kappa = (fxx * fy * fy - 2.0 * fx * fy * fxy + fyy * fx * fx) / denom
    kappa[degenerate] = 0.0
    return phi.like(kappa), int(np.count_nonzero(degenerate))


def curvature(phi: ScalarField) -> ScalarField:
    return curvature_with_count(phi)[0]


def aos_geodesic_step(phi: ScalarField, g: ScalarField, dt: float) -> ScalarField:
    """Semi-implicit additive-operator-splitting step of the edge-weighted
    geodesic flow, unconditionally stable in dt."""
    if phi.shape != g.shape:
        raise ValueError("phi and g shapes differ")
    if np.any(g.data <= 0):
        raise ValueError("edge function must be strictly positive")
    if np.any(g.data > 1.0 + 1e-9):
        raise ValueError("edge function must not exceed 1")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return phi.like(phi.data.copy())
    return phi.like(aos_step(phi.data, g.data, g.data, dt))
