"""Tests for the GRD1/PGM/PPM readers and writers."""

import numpy as np
import pytest

from trackseg.fields import ScalarField
from trackseg.fileio import (contour_pixels, read_grd1, read_mask_pgm, read_pgm,
                             write_grd1, write_mask_pgm, write_overlay_ppm,
                             write_pgm)


def disk_phi(n=32, r=10.0):
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    return np.hypot(yy - n / 2, xx - n / 2) - r


class TestGrd1:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        f = ScalarField(rng.standard_normal((9, 13)), spacing=0.5)
        p = tmp_path / "f.grd1"
        write_grd1(p, f)
        g = read_grd1(p)
        assert g.shape == f.shape
        assert g.spacing == f.spacing
        # payload is float32, so roundtrip is exact at float32 resolution
        assert np.allclose(g.data, f.data.astype(np.float32))

    def test_rejects_bad_magic(self, tmp_path):
        p = tmp_path / "bad.grd1"
        p.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(ValueError, match="not a GRD1"):
            read_grd1(p)

    def test_rejects_truncated_payload(self, tmp_path):
        f = ScalarField(np.zeros((8, 8)))
        p = tmp_path / "f.grd1"
        write_grd1(p, f)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_grd1(p)


class TestPgm:
    def test_roundtrip_scaling(self, tmp_path):
        f = ScalarField(np.linspace(0, 2.0, 48).reshape(6, 8))
        p = tmp_path / "f.pgm"
        write_pgm(p, f)
        g = read_pgm(p)
        assert g.shape == f.shape
        assert np.allclose(g.data / 255.0 * 2.0, f.data, atol=2.0 / 255.0)

    def test_header_comments_are_skipped(self, tmp_path):
        body = bytes(range(12))
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# a comment\n4 3\n# another\n255\n" + body)
        g = read_pgm(p)
        assert g.shape == (3, 4)
        assert g.data.ravel().tolist() == list(range(12))

    def test_rejects_non_pgm(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P3\n2 2\n255\n")
        with pytest.raises(ValueError, match="not a binary PGM"):
            read_pgm(p)

    def test_rejects_wide_maxval(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P5\n2 2\n65535\n" + b"\0" * 8)
        with pytest.raises(ValueError, match="maxval"):
            read_pgm(p)

    def test_mask_roundtrip_is_exact(self, tmp_path):
        mask = ScalarField((disk_phi() <= 0).astype(np.float64))
        p = tmp_path / "m.pgm"
        write_mask_pgm(p, mask)
        g = read_mask_pgm(p)
        assert np.array_equal(g.data, mask.data)


class TestOverlayPpm:
    def test_contour_pixels_get_the_color(self, tmp_path):
        phi = disk_phi()
        img = ScalarField(np.full(phi.shape, 0.5))
        contour = contour_pixels(phi)
        p = tmp_path / "o.ppm"
        write_overlay_ppm(p, img, contour, color=(255, 64, 0))
        raw = p.read_bytes()
        assert raw.startswith(b"P6\n32 32\n255\n")
        rgb = np.frombuffer(raw[len(b"P6\n32 32\n255\n"):], dtype=np.uint8)
        rgb = rgb.reshape(32, 32, 3)
        assert np.all(rgb[contour] == np.array([255, 64, 0]))
        off = ~contour
        assert np.all(rgb[off, 0] == rgb[off, 1])
        assert np.all(rgb[off, 1] == rgb[off, 2])


class TestContourPixels:
    def test_disk_contour_is_a_thin_ring(self):
        phi = disk_phi(n=64, r=20.0)
        c = contour_pixels(phi)
        yy, xx = np.nonzero(c)
        r = np.hypot(yy - 32, xx - 32)
        assert np.all(np.abs(r - 20.0) < 1.5)
        # inside pixels only
        assert np.all(phi[c] <= 0)

    def test_no_contour_for_uniform_sign(self):
        assert not contour_pixels(np.ones((8, 8))).any()
