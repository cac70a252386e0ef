from __future__ import annotations

import logging
from importlib import resources
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import nnls

from .caching import cached_callable
from .config import WavelengthGrid
from .errors import GridMismatchError, WavelengthOutOfRange

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

log = logging.getLogger(__name__)

__all__ = (
    "LASER_FWHM",
    "SpectralCube",
    "SpectralCurve",
    "SpectralLifter",
    "channel_weights",
    "cie_cmf",
    "daylight_illuminant",
    "identity_illuminant",
    "laser_profile",
    "lift_rgb_to_hsi",
    "project_hsi_to_rgb",
)

LASER_FWHM = 10e-9
TABLE_RANGE = (380e-9, 780e-9)


@cached_callable("tables")
def _load_table(name: str) -> NDArray[np.float64]:
    with resources.files("dazzlesim.data").joinpath(name).open("r", encoding="utf-8") as f:
        table = np.loadtxt(f, delimiter=",", skiprows=1, dtype=np.float64)
    table.flags.writeable = False
    return table


def _check_support(grid: WavelengthGrid) -> None:
    low, high = TABLE_RANGE
    for lam in (grid.lambda_min, grid.lambda_max):
        if not low - 1e-15 <= lam <= high + 1e-15:
            raise WavelengthOutOfRange(lam, low, high)


class SpectralCurve:
    r"""Per-band values of a spectral quantity (illuminant power, laser line, color matching function).

    .. container:: operations

        .. describe:: len(x)

            Returns the number of bands.

    Attributes
    ----------
    grid: :class:`~dazzlesim.config.WavelengthGrid`
        The grid the curve is sampled on.
    values: :class:`numpy.ndarray`
        One non-negative value per band.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: WavelengthGrid, values: ArrayLike) -> None:
        arr = np.array(values, dtype=np.float64)
        if arr.shape != (len(grid),):
            raise GridMismatchError((len(grid),), arr.shape)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("spectral curves must be finite and non-negative")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"<SpectralCurve grid={self.grid!r} peak={self.values.max():.4g}>"


class SpectralCube:
    r"""A ``(height, width, bands)`` non-negative volume on an explicit wavelength grid.

    The array layout is row-major with the band index fastest, which is also the on-disk layout.

    Attributes
    ----------
    data: :class:`numpy.ndarray`
        The values, ``float64``.
    grid: :class:`~dazzlesim.config.WavelengthGrid`
        The band centers.
    """

    __slots__ = ("data", "grid")

    def __init__(self, data: ArrayLike, grid: WavelengthGrid, *, validate: bool = True) -> None:
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3:
            raise GridMismatchError("(height, width, bands)", arr.shape)
        if arr.shape[2] != len(grid):
            raise GridMismatchError(len(grid), arr.shape[2])
        if validate:
            if not np.all(np.isfinite(arr)):
                raise ValueError("spectral cube holds non-finite values")
            if np.any(arr < 0):
                raise ValueError("spectral cube holds negative values")
        self.data = arr
        self.grid = grid

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    def band(self, index: int) -> NDArray[np.float64]:
        return self.data[:, :, index]

    @classmethod
    def zeros(cls, height: int, width: int, grid: WavelengthGrid) -> SpectralCube:
        return cls(np.zeros((height, width, len(grid))), grid, validate=False)

    def __repr__(self) -> str:
        return f"<SpectralCube {self.height}x{self.width} bands={self.bands}>"


def cie_cmf(grid: WavelengthGrid) -> tuple[SpectralCurve, SpectralCurve, SpectralCurve]:
    r"""Samples the CIE 1931 2° color matching functions on ``grid`` with linear interpolation.

    Raises
    ------
    WavelengthOutOfRange
        Part of the grid lies outside the 380-780 nm table.
    """

    _check_support(grid)
    table = _load_table("cie1931_2deg.csv")
    nm = grid.nm
    curves = [np.interp(nm, table[:, 0], table[:, col]) for col in (1, 2, 3)]
    return (
        SpectralCurve(grid, curves[0]),
        SpectralCurve(grid, curves[1]),
        SpectralCurve(grid, curves[2]),
    )


def daylight_illuminant(grid: WavelengthGrid) -> SpectralCurve:
    """CIE D65 relative power, scaled so the band sum times the band spacing in nanometers is 1."""

    _check_support(grid)
    table = _load_table("cie_d65.csv")
    values = np.interp(grid.nm, table[:, 0], table[:, 1])
    return SpectralCurve(grid, values / (values.sum() * grid.delta_lambda * 1e9))


def identity_illuminant(grid: WavelengthGrid) -> SpectralCurve:
    return SpectralCurve(grid, np.ones(len(grid)))


def laser_profile(
    lambda_l: float, grid: WavelengthGrid, *, fwhm: float = LASER_FWHM
) -> SpectralCurve:
    r"""A unit-peak Gaussian line centered on ``lambda_l`` with the given full width at half maximum.

    Raises
    ------
    WavelengthOutOfRange
        ``lambda_l`` lies outside the grid.
    """

    if not grid.lambda_min <= lambda_l <= grid.lambda_max:
        raise WavelengthOutOfRange(lambda_l, grid.lambda_min, grid.lambda_max)
    sigma = fwhm / (2 * np.sqrt(2 * np.log(2)))
    return SpectralCurve(grid, np.exp(-0.5 * ((grid.lambdas - lambda_l) / sigma) ** 2))


def channel_weights(illuminant: SpectralCurve) -> NDArray[np.float64]:
    r"""The ``(3, bands)`` projection matrix of the hyperspectral to RGB conversion.

    Row ``c`` holds ``I(λ)·cmf_c(λ) / Σ I(λ)·ȳ(λ)``, i.e. the normalization constant ``k`` followed by the
    division by 100, so a unit flat spectrum maps to a G value of exactly 1. The band spacing cancels.
    """

    cmf = np.stack([curve.values for curve in cie_cmf(illuminant.grid)])
    weighted = cmf * illuminant.values[None, :]
    norm = weighted[1].sum()
    if norm <= 0:
        raise ValueError("illuminant has no overlap with the luminosity function")
    return weighted / norm


def project_hsi_to_rgb(cube: SpectralCube, illuminant: SpectralCurve) -> NDArray[np.float64]:
    """Projects a cube to three channels through the color matching functions, weighted by ``illuminant``.

    Raises
    ------
    GridMismatchError
        The cube and the illuminant are sampled on different grids.
    """

    if cube.grid != illuminant.grid:
        raise GridMismatchError(illuminant.grid, cube.grid)
    weights = channel_weights(illuminant)
    return np.einsum("hwb,cb->hwc", cube.data, weights)


class SpectralLifter:
    r"""Deterministic RGB to hyperspectral lifting over a small basis of smooth Gaussian bumps.

    Each pixel's coefficient vector is the minimum-norm solution that reproduces the pixel's channel values
    under :func:`project_hsi_to_rgb` with an identity illuminant. Pixels whose minimum-norm solution has a
    negative coefficient are re-solved by non-negative least squares with a small ridge term.

    The reachable colors form the cone spanned by the basis columns under the projection. Inside it the
    round trip reproduces the color up to ``sqrt(ridge)·|c|`` for the smallest exact coefficients ``c``.
    Outside it, which covers many saturated triples of the unit cube since the channels are the CIE
    functions, the result is the nearest reachable color and the error is the distance to the cone.

    Parameters
    ----------
    grid: :class:`~dazzlesim.config.WavelengthGrid`
        The output grid.
    n_basis: :class:`int`
        Number of bumps, spread evenly over 400-700 nm.
    ridge: :class:`float`
        Coefficient-norm weight of the non-negative fallback.
    """

    __slots__ = ("basis", "grid", "matrix", "pinv", "ridge")

    def __init__(self, grid: WavelengthGrid, *, n_basis: int = 8, ridge: float = 1e-12) -> None:
        centers = np.linspace(400e-9, 700e-9, n_basis)
        sigma = 0.75 * (centers[1] - centers[0])
        self.grid = grid
        self.ridge = ridge
        self.basis = np.exp(-0.5 * ((grid.lambdas[:, None] - centers[None, :]) / sigma) ** 2)
        self.matrix = channel_weights(identity_illuminant(grid)) @ self.basis
        self.pinv = np.linalg.pinv(self.matrix)

    def coefficients(self, rgb: NDArray[np.float64]) -> NDArray[np.float64]:
        """Basis coefficients for an ``(n, 3)`` array of channel values."""

        coeffs = rgb @ self.pinv.T
        bad = np.flatnonzero(np.any(coeffs < 0, axis=1))
        if bad.size:
            log.debug("Lifting %d of %d pixels through the non-negative fallback", bad.size, len(rgb))
            k = self.matrix.shape[1]
            system = np.vstack([self.matrix, np.sqrt(self.ridge) * np.eye(k)])
            target = np.zeros(3 + k)
            unique, inverse = np.unique(rgb[bad], axis=0, return_inverse=True)
            solved = np.empty((len(unique), k))
            for i, row in enumerate(unique):
                target[:3] = row
                solved[i] = nnls(system, target)[0]
            coeffs[bad] = solved[inverse.reshape(-1)]
        return coeffs

    def lift(self, rgb: ArrayLike) -> SpectralCube:
        arr = np.asarray(rgb, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise GridMismatchError("(height, width, 3)", arr.shape)
        coeffs = self.coefficients(arr.reshape(-1, 3))
        spectra = coeffs @ self.basis.T
        return SpectralCube(spectra.reshape(*arr.shape[:2], len(self.grid)), self.grid, validate=False)


@cached_callable("lifters")
def _lifter(grid: WavelengthGrid) -> SpectralLifter:
    return SpectralLifter(grid)


def lift_rgb_to_hsi(rgb: ArrayLike, grid: WavelengthGrid) -> SpectralCube:
    """Lifts an ``(height, width, 3)`` image in [0, 1] to a smooth non-negative cube on ``grid``.

    See :class:`SpectralLifter` for the method.
    """

    return _lifter(grid).lift(rgb)
