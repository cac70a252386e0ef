# pyright: basic

import math

import numpy as np
import pytest

from dazzlesim.config import SimConfig
from dazzlesim.errors import DegenerateMaskError, GridMismatchError, ShapeMismatch
from dazzlesim.metrics import (
    CHARBONNIER_EPS,
    QualityReport,
    SuppressionReport,
    bsr,
    charbonnier_fft,
    compare_masks,
    i_sat,
    l1,
    l_doe,
    lsr,
    psnr,
    quality_report,
    smooth_peak,
    smooth_peak_grad,
    suppression_report,
)
from dazzlesim.optics import HeightMap, PsfStack, build_psf_stack, uncoded_psf_stack


class TestISat:
    def test_closed_form(self):
        cfg = SimConfig()
        by_hand = 25500 * 6.63e-34 * 3e8 / (550e-9 * 0.1 * (2.9e-6) ** 2 * 0.56)
        assert float(i_sat(550e-9, cfg)) == pytest.approx(by_hand, rel=1e-12)

    def test_monotone(self):
        cfg = SimConfig()
        values = i_sat(cfg.grid.lambdas, cfg)
        assert np.all(np.diff(values) < 0)

    def test_exposure_override(self):
        cfg = SimConfig()
        assert float(i_sat(550e-9, cfg, exposure_time=0.05)) == pytest.approx(2 * float(i_sat(550e-9, cfg)))


class TestSuppression:
    def test_flat_mask_is_neutral(self, small_cfg: SimConfig):
        uncoded = uncoded_psf_stack(small_cfg)
        coded = build_psf_stack(HeightMap.flat(small_cfg), small_cfg)
        for lam in small_cfg.grid.lambdas:
            assert lsr(coded, uncoded, lam) == pytest.approx(1.0)
            assert bsr(coded, uncoded, lam) == pytest.approx(1.0)
        assert l_doe(coded, uncoded) == pytest.approx(2 * small_cfg.n_bands)

    def test_report_roundtrip(self, small_cfg: SimConfig):
        rng = np.random.default_rng(0)
        mask = HeightMap.from_config(rng.uniform(0, small_cfg.doe_h_max, small_cfg.pupil_res), small_cfg)
        report = suppression_report(build_psf_stack(mask, small_cfg), uncoded_psf_stack(small_cfg))
        data = report.to_dict()
        assert data["mean_lsr"] == pytest.approx(np.mean(data["lsr"]))
        assert data["max_bsr"] == pytest.approx(max(data["bsr"]))
        assert SuppressionReport.from_dict(data) == report

    def test_smooth_mode_is_below_report(self, small_cfg: SimConfig):
        rng = np.random.default_rng(1)
        mask = HeightMap.from_config(rng.uniform(0, small_cfg.doe_h_max, small_cfg.pupil_res), small_cfg)
        coded, uncoded = build_psf_stack(mask, small_cfg), uncoded_psf_stack(small_cfg)
        assert l_doe(coded, uncoded, mode="smooth") <= l_doe(coded, uncoded) + 1e-12
        with pytest.raises(ValueError, match="unknown loss mode"):
            l_doe(coded, uncoded, mode="other")  # pyright: ignore[reportArgumentType]

    def test_degenerate(self, small_cfg: SimConfig):
        uncoded = uncoded_psf_stack(small_cfg)
        dark = PsfStack(
            np.zeros((small_cfg.n_bands, *small_cfg.sensor_res)),
            small_cfg.grid,
            small_cfg.sensor_pitch,
            total_energies=np.zeros(small_cfg.n_bands),
            config_hash=uncoded.config_hash,
            mask_hash="dark",
        )
        with pytest.raises(DegenerateMaskError, match="450.0 nm"):
            l_doe(dark, uncoded)

    def test_config_mismatch(self, small_cfg: SimConfig):
        other = small_cfg.replace(focal_length=0.12)
        with pytest.raises(GridMismatchError):
            lsr(uncoded_psf_stack(other), uncoded_psf_stack(small_cfg), 550e-9)

    def test_compare_masks(self, small_cfg: SimConfig):
        reports = compare_masks(small_cfg, {"flat": HeightMap.flat(small_cfg)})
        assert list(reports) == ["flat"]
        np.testing.assert_allclose(reports["flat"].lsr, 1.0)


class TestSmoothPeak:
    @pytest.fixture
    def x(self) -> np.ndarray:
        return 0.1 + np.random.default_rng(2).random((12, 12)) ** 4

    def test_bounds(self, x: np.ndarray):
        beta = 50.0
        value = smooth_peak(x, beta)
        assert value <= x.max()
        assert value >= x.max() * x.size ** (-1 / beta)

    def test_single_spike_attains_lower_bound(self):
        x = np.zeros((128, 128))
        x[40, 70] = 3e-6
        assert smooth_peak(x, 50.0) == pytest.approx(3e-6 * x.size ** (-1 / 50), rel=1e-12)
        assert smooth_peak(x, 50.0) / x.max() == pytest.approx(0.8234, abs=1e-3)

    def test_flat_attains_max(self):
        assert smooth_peak(np.full((16, 16), 2e-6), 50.0) == pytest.approx(2e-6, rel=1e-12)

    def test_scales(self, x: np.ndarray):
        assert smooth_peak(1e-6 * x, 50.0) == pytest.approx(1e-6 * smooth_peak(x, 50.0))

    def test_gradient(self, x: np.ndarray):
        value, grad = smooth_peak_grad(x, 20.0)
        assert value == pytest.approx(smooth_peak(x, 20.0))
        rng = np.random.default_rng(3)
        d = rng.standard_normal(x.shape)
        step = 1e-7
        fd = (smooth_peak(x + step * d, 20.0) - smooth_peak(x - step * d, 20.0)) / (2 * step)
        assert np.sum(grad * d) == pytest.approx(fd, rel=1e-5)

    def test_zero(self):
        with pytest.raises(ValueError, match="all-zero"):
            smooth_peak(np.zeros((3, 3)), 50.0)


class TestQuality:
    def test_charbonnier_identity(self):
        img = np.random.default_rng(4).random((16, 16, 3))
        expected = (img.size + 8 * 8 * 3) * math.sqrt(CHARBONNIER_EPS)
        assert charbonnier_fft(img, img) == pytest.approx(expected)

    def test_charbonnier_grows_with_error(self):
        rng = np.random.default_rng(5)
        gt = rng.random((16, 16, 3))
        small = charbonnier_fft(gt + 0.01 * rng.standard_normal(gt.shape), gt)
        large = charbonnier_fft(gt + 0.1 * rng.standard_normal(gt.shape), gt)
        assert small < large

    def test_shapes(self):
        with pytest.raises(ShapeMismatch):
            charbonnier_fft(np.zeros((4, 4)), np.zeros((4, 5)))
        with pytest.raises(ShapeMismatch):
            l1(np.zeros((4, 4)), np.zeros((5, 4)))

    def test_psnr(self):
        gt = np.full((4, 4), 0.5)
        assert psnr(gt, gt) == math.inf
        assert psnr(gt + 0.1, gt) == pytest.approx(20.0)

    def test_report(self):
        gt = np.zeros((8, 8, 3))
        report = quality_report(gt, gt)
        assert isinstance(report, QualityReport)
        data = report.to_dict()
        assert data["l1"] == 0
        assert data["psnr"] is None
        assert QualityReport.from_dict(data).psnr == math.inf
