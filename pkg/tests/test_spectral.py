# pyright: basic

import numpy as np
import pytest
from scipy.optimize import nnls

from dazzlesim.config import WavelengthGrid
from dazzlesim.errors import GridMismatchError, WavelengthOutOfRange
from dazzlesim.spectral import (
    SpectralCube,
    SpectralCurve,
    SpectralLifter,
    channel_weights,
    cie_cmf,
    daylight_illuminant,
    identity_illuminant,
    laser_profile,
    lift_rgb_to_hsi,
    project_hsi_to_rgb,
)

GRID = WavelengthGrid(400e-9, 700e-9, 31)


class TestTables:
    def test_cmf_shape(self):
        x, y, z = cie_cmf(GRID)
        assert all(np.all(c.values >= 0) for c in (x, y, z))
        i450, i550, i600 = (GRID.index_of(lam) for lam in (450e-9, 550e-9, 600e-9))
        assert y.values[i550] > y.values[i450]
        assert z.values[i450] > x.values[i450]
        assert x.values[i600] > z.values[i600]

    def test_out_of_support(self):
        with pytest.raises(WavelengthOutOfRange):
            cie_cmf(WavelengthGrid(300e-9, 700e-9, 5))

    def test_daylight(self):
        d65 = daylight_illuminant(GRID)
        assert d65.values.sum() * GRID.delta_lambda * 1e9 == pytest.approx(1.0)
        assert d65.values[GRID.index_of(460e-9)] > d65.values[GRID.index_of(700e-9)]
        assert np.all(d65.values > 0)


class TestLaserProfile:
    grid = WavelengthGrid(500e-9, 600e-9, 21)

    def test_shape(self):
        line = laser_profile(550e-9, self.grid)
        assert line.values[self.grid.index_of(550e-9)] == pytest.approx(1.0)
        assert line.values[self.grid.index_of(545e-9)] == pytest.approx(0.5)
        assert line.values[self.grid.index_of(555e-9)] == pytest.approx(0.5)
        assert line.values[self.grid.index_of(570e-9)] < 1e-4

    def test_out_of_range(self):
        with pytest.raises(WavelengthOutOfRange):
            laser_profile(650e-9, self.grid)


class TestContainers:
    def test_curve_validation(self):
        with pytest.raises(ValueError, match="non-negative"):
            SpectralCurve(GRID, -np.ones(31))
        with pytest.raises(GridMismatchError):
            SpectralCurve(GRID, np.ones(30))

    def test_cube_validation(self):
        with pytest.raises(ValueError, match="negative"):
            SpectralCube(-np.ones((2, 2, 31)), GRID)
        with pytest.raises(GridMismatchError):
            SpectralCube(np.ones((2, 2, 30)), GRID)
        cube = SpectralCube.zeros(3, 4, GRID)
        assert (cube.height, cube.width, cube.bands) == (3, 4, 31)


class TestProjection:
    def test_zero(self):
        rgb = project_hsi_to_rgb(SpectralCube.zeros(2, 2, GRID), identity_illuminant(GRID))
        assert np.all(rgb == 0)

    @pytest.mark.parametrize("illuminant", [identity_illuminant(GRID), daylight_illuminant(GRID)])
    def test_flat_spectrum_has_unit_g(self, illuminant: SpectralCurve):
        rgb = project_hsi_to_rgb(SpectralCube(np.ones((1, 1, 31)), GRID), illuminant)
        assert rgb[0, 0, 1] == pytest.approx(1.0, rel=1e-12)
        assert channel_weights(illuminant)[1].sum() == pytest.approx(1.0, rel=1e-12)

    def test_monochromatic_green(self):
        data = np.zeros((1, 1, 31))
        data[0, 0, GRID.index_of(550e-9)] = 1.0
        rgb = project_hsi_to_rgb(SpectralCube(data, GRID), identity_illuminant(GRID))
        assert rgb[0, 0, 1] > rgb[0, 0, 2]

    def test_grid_mismatch(self):
        other = WavelengthGrid(400e-9, 700e-9, 16)
        with pytest.raises(GridMismatchError):
            project_hsi_to_rgb(SpectralCube.zeros(1, 1, GRID), identity_illuminant(other))


class TestLifting:
    def roundtrip(self, rgb: np.ndarray) -> np.ndarray:
        return project_hsi_to_rgb(lift_rgb_to_hsi(rgb, GRID), identity_illuminant(GRID))

    def test_black(self):
        cube = lift_rgb_to_hsi(np.zeros((2, 2, 3)), GRID)
        assert np.all(cube.data == 0)

    def test_gray(self):
        back = self.roundtrip(np.full((1, 1, 3), 0.5))
        np.testing.assert_allclose(back, 0.5, rtol=1e-3)

    def test_red_mass_is_long_wave(self):
        cube = lift_rgb_to_hsi(np.array([[[0.8, 0.1, 0.1]]]), GRID)
        spectrum = cube.data[0, 0]
        assert spectrum[GRID.lambdas > 580e-9].sum() > spectrum[GRID.lambdas <= 580e-9].sum()

    def test_roundtrip_random_triples(self):
        lifter = SpectralLifter(GRID)
        rgb = np.random.default_rng(0).random((1000, 3))
        back = self.roundtrip(rgb[None])[0]
        err = np.linalg.norm(back - rgb, axis=1)
        norm = np.linalg.norm(rgb, axis=1)

        nearest = [nnls(lifter.matrix, row) for row in rgb]
        distance = np.array([rho for _, rho in nearest])
        bound = np.sqrt(distance**2 + lifter.ridge * np.array([c @ c for c, _ in nearest]))
        # never farther than the nearest reachable color, up to the ridge term
        assert np.all(err <= bound + 1e-6)

        reachable = distance <= 1e-10 * norm
        assert reachable.sum() >= 100
        assert np.max(err[reachable] / norm[reachable]) <= 1e-3
        assert np.all(lift_rgb_to_hsi(rgb[None], GRID).data >= 0)

    def test_roundtrip_basis_colors(self):
        lifter = SpectralLifter(GRID)
        rng = np.random.default_rng(0)
        coeffs = rng.random((1000, lifter.basis.shape[1]))
        spectra = coeffs @ lifter.basis.T
        rgb = project_hsi_to_rgb(SpectralCube(spectra[None], GRID), identity_illuminant(GRID))
        rgb /= rgb.max()
        back = self.roundtrip(rgb)
        assert np.max(np.abs(back - rgb) / np.abs(rgb)) <= 1e-3

    def test_linear_and_non_negative(self):
        rng = np.random.default_rng(1)
        rgb = rng.random((8, 8, 3))
        full = lift_rgb_to_hsi(rgb, GRID).data
        half = lift_rgb_to_hsi(0.5 * rgb, GRID).data
        assert np.all(full >= 0)
        np.testing.assert_allclose(half, 0.5 * full, rtol=1e-6, atol=1e-9)

    def test_rejects_bad_shape(self):
        with pytest.raises(GridMismatchError):
            lift_rgb_to_hsi(np.zeros((2, 2)), GRID)
