"""Tests for the synthetic ultrasound phantom generator."""

import numpy as np
import pytest

from trackseg.phantom import (PhantomSpec, _displacement, _jacobian_positive,
                              generate, generate_dataset, read_dataset,
                              sample_digest, write_dataset)


class TestPhantomSpec:
    @pytest.mark.parametrize("kwargs", [
        {"rows": 16}, {"contrast_ratio": 1.0}, {"max_displacement": 100.0},
        {"attenuation": 1.0}, {"semi_axes": (0.7, 0.2)}, {"n_shadows": -1},
        {"shadow_depth": -1.0}, {"rim_width": -1}, {"rim_gain": 0.5},
        {"rim_offset": -1},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            PhantomSpec(**kwargs)


class TestGenerate:
    def test_deterministic_given_seed(self):
        spec = PhantomSpec(seed=5)
        assert sample_digest(generate(spec)) == sample_digest(generate(spec))

    def test_different_seeds_differ(self):
        assert sample_digest(generate(PhantomSpec(seed=1))) != \
               sample_digest(generate(PhantomSpec(seed=2)))

    def test_envelope_nonnegative(self):
        s = generate(PhantomSpec(seed=3))
        assert np.all(s.envelope.data >= 0)

    def test_mask_is_binary_single_blob(self):
        from scipy.ndimage import label
        s = generate(PhantomSpec(seed=4))
        m = s.truth_mask.data
        assert set(np.unique(m)) <= {0.0, 1.0}
        frac = m.mean()
        assert 0.05 <= frac <= 0.60
        assert label(m > 0)[1] == 1

    def test_reflectivity_variance_ratio_tracks_contrast(self):
        # without shadows, the inside/outside variance of the scatterer field
        # must sit near the requested contrast ratio (the capsule is folded
        # into the normalization)
        ratios = []
        for seed in range(4):
            s = generate(PhantomSpec(seed=seed, n_shadows=0, contrast_ratio=4.0))
            m = s.truth_mask.data > 0
            r = s.reflectivity.data
            ratios.append(r[m].var() / r[~m].var())
        assert 3.5 <= np.mean(ratios) <= 4.5

    def test_capsule_brightens_the_boundary_band(self):
        from scipy.ndimage import binary_erosion
        s = generate(PhantomSpec(seed=6, n_shadows=0, rim_gain=2.0,
                                 rim_offset=3, rim_width=7))
        m = s.truth_mask.data > 0
        core = binary_erosion(m, iterations=15)
        rim = binary_erosion(m, iterations=3) & ~binary_erosion(m, iterations=10)
        env = s.envelope.data
        assert env[rim].mean() > 1.2 * env[core].mean()

    def test_shadow_attenuates_envelope(self):
        spec = PhantomSpec(seed=7, n_shadows=1, attenuation=0.8)
        s = generate(spec)
        shadowed = s.shadow.data < 0.5
        lit = s.shadow.data > 0.9
        assert shadowed.any() and lit.any()
        ratio = s.envelope.data[shadowed].mean() / s.envelope.data[lit].mean()
        assert ratio <= 0.4

    def test_displacement_keeps_positive_jacobian(self):
        spec = PhantomSpec(seed=8)
        rng = np.random.default_rng(8)
        dy, dx = _displacement(spec, rng)
        assert np.hypot(dy, dx).max() <= spec.max_displacement + 1e-9
        assert _jacobian_positive(dy, dx)


class TestDataset:
    def test_split_sizes(self):
        train, test = generate_dataset(PhantomSpec(rows=64, cols=64, seed=0), 6)
        assert len(train) == 3 and len(test) == 3

    def test_sequential_seeds(self):
        train, test = generate_dataset(PhantomSpec(rows=64, cols=64, seed=2), 4)
        direct = generate(PhantomSpec(rows=64, cols=64, seed=3))
        assert sample_digest(train[1]) == sample_digest(direct)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError, match="two samples"):
            generate_dataset(PhantomSpec(), 1)
        with pytest.raises(ValueError, match="split"):
            generate_dataset(PhantomSpec(), 4, split=1.0)

    def test_write_read_roundtrip(self, tmp_path):
        spec = PhantomSpec(rows=64, cols=64, seed=1)
        train, test = generate_dataset(spec, 4)
        write_dataset(tmp_path / "ds", spec, train, test)
        spec2, train2, test2 = read_dataset(tmp_path / "ds")
        assert spec2 == spec
        assert len(train2) == 2 and len(test2) == 2
        assert np.array_equal(train2[0][1].data, train[0].truth_mask.data)
        assert np.allclose(train2[0][0].data,
                           train[0].envelope.data.astype(np.float32))
