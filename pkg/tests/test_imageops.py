# pyright: basic

import warnings

import numpy as np
import pytest

from dazzlesim.imageops import downsample_half, resize_bicubic


class TestResize:
    def test_constant_image_stays_constant(self):
        img = np.full((16, 12, 3), 0.25)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            out = resize_bicubic(img, (8, 6))
        assert out.shape == (8, 6, 3)
        np.testing.assert_allclose(out, 0.25, atol=1e-6)

    def test_keeps_fractional_values(self):
        rng = np.random.default_rng(0)
        img = rng.random((10, 10)) * 1e-3
        out = resize_bicubic(img, (20, 20))
        assert out.dtype == np.float64
        assert len(np.unique(out)) > 256
        assert out.mean() == pytest.approx(img.mean(), rel=0.05)

    def test_channels_are_independent(self):
        img = np.zeros((8, 8, 3))
        img[:, :, 1] = 1.0
        out = resize_bicubic(img, (4, 4))
        np.testing.assert_allclose(out[:, :, 0], 0.0, atol=1e-6)
        np.testing.assert_allclose(out[:, :, 1], 1.0, atol=1e-6)

    def test_same_size_copies(self):
        img = np.ones((4, 4))
        out = resize_bicubic(img, (4, 4))
        out[0, 0] = 2.0
        assert img[0, 0] == 1.0

    def test_downsample_half(self):
        assert downsample_half(np.ones((9, 6, 3))).shape == (4, 3, 3)
        assert downsample_half(np.ones((1, 1))).shape == (1, 1)
