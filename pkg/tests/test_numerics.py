"""Tests for the tridiagonal solver and the semi-implicit diffusion sweeps."""

import numpy as np
import pytest

from trackseg.numerics import (aos_step, flux_divergence,
                               implicit_diffusion_lines, thomas_batch)
from trackseg.fields import laplacian_array


def random_dd_tridiag(rng, batch, n):
    lower = rng.uniform(-1, 1, (batch, n))
    upper = rng.uniform(-1, 1, (batch, n))
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(1.0, 2.0, (batch, n))
    return lower, diag, upper


class TestThomasBatch:
    def test_matches_dense_solver(self):
        rng = np.random.default_rng(0)
        batch, n = 5, 17
        lower, diag, upper = random_dd_tridiag(rng, batch, n)
        rhs = rng.standard_normal((batch, n))
        x = thomas_batch(lower, diag, upper, rhs)
        for b in range(batch):
            dense = np.diag(diag[b]) + np.diag(lower[b, 1:], -1) + np.diag(upper[b, :-1], 1)
            assert np.allclose(x[b], np.linalg.solve(dense, rhs[b]), atol=1e-10)

    def test_identity_system(self):
        rhs = np.random.default_rng(1).standard_normal((3, 9))
        x = thomas_batch(np.zeros_like(rhs), np.ones_like(rhs),
                         np.zeros_like(rhs), rhs)
        assert np.allclose(x, rhs)


class TestImplicitDiffusionLines:
    def test_conserves_mass_per_line(self):
        rng = np.random.default_rng(2)
        u = rng.uniform(0, 1, (6, 20))
        cond = rng.uniform(0.2, 1.0, (6, 20))
        out = implicit_diffusion_lines(u, cond, dt=3.0, axis=1)
        assert np.allclose(out.sum(axis=1), u.sum(axis=1), atol=1e-10)

    def test_axis0_equals_transposed_axis1(self):
        rng = np.random.default_rng(3)
        u = rng.uniform(0, 1, (7, 9))
        cond = rng.uniform(0.2, 1.0, (7, 9))
        a = implicit_diffusion_lines(u, cond, 2.0, axis=0)
        b = implicit_diffusion_lines(u.T, cond.T, 2.0, axis=1).T
        assert np.allclose(a, b)

    def test_constant_field_is_fixed_point(self):
        u = np.full((5, 11), 4.2)
        cond = np.random.default_rng(4).uniform(0.1, 1.0, u.shape)
        out = implicit_diffusion_lines(u, cond, 10.0, axis=1)
        assert np.allclose(out, u)

    def test_smooths_towards_line_mean(self):
        u = np.zeros((1, 30))
        u[0, 10:20] = 1.0
        out = u
        for _ in range(200):
            out = implicit_diffusion_lines(out, np.ones_like(u), 5.0, axis=1)
        assert np.allclose(out, u.mean(), atol=1e-3)


class TestAosStep:
    def test_constant_fixed_point_and_mass(self):
        rng = np.random.default_rng(5)
        u = rng.uniform(0, 1, (16, 16))
        c = rng.uniform(0.2, 1.0, (16, 16))
        out = aos_step(u, c, c, dt=2.0)
        assert np.allclose(out.sum(), u.sum(), atol=1e-9)
        const = np.full_like(u, 1.7)
        assert np.allclose(aos_step(const, c, c, 5.0), const)

    def test_reduces_variance(self):
        rng = np.random.default_rng(6)
        u = rng.standard_normal((16, 16))
        out = aos_step(u, np.ones_like(u), np.ones_like(u), dt=1.0)
        assert out.var() < u.var()

    def test_stable_for_large_dt(self):
        rng = np.random.default_rng(7)
        u = rng.standard_normal((16, 16))
        out = aos_step(u, np.ones_like(u), np.ones_like(u), dt=1e4)
        assert np.all(np.isfinite(out))
        assert out.max() <= u.max() + 1e-9
        assert out.min() >= u.min() - 1e-9


class TestFluxDivergence:
    def test_sums_to_zero_exactly(self):
        rng = np.random.default_rng(8)
        u = rng.standard_normal((12, 14))
        c = rng.uniform(0.1, 2.0, (12, 14))
        assert flux_divergence(c, u).sum() == pytest.approx(0.0, abs=1e-12)

    def test_unit_conductivity_matches_laplacian_interior(self):
        rng = np.random.default_rng(9)
        u = rng.standard_normal((10, 10))
        out = flux_divergence(np.ones_like(u), u)
        assert np.allclose(out[1:-1, 1:-1], laplacian_array(u)[1:-1, 1:-1])
