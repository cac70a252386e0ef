from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING

import numpy as np
from scipy.ndimage import gaussian_filter

from .caching import cached_callable
from .errors import ApertureTooLarge, GridMismatchError, PropagationError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from .config import SimConfig, WavelengthGrid

log = logging.getLogger(__name__)

__all__ = (
    "HeightMap",
    "Propagator",
    "PsfStack",
    "PupilField",
    "aperture_mask",
    "build_psf_stack",
    "doe_phase",
    "otf",
    "propagate_psf",
    "pupil_coordinates",
    "pupil_function",
    "smooth_heights",
    "uncoded_psf_stack",
)

# slack on the alias-free bound of the scaled transform
ALIAS_TOLERANCE = 1e-9


class HeightMap:
    r"""A DOE, stored as physical heights over the pupil grid.

    Heights are kept at single precision (the on-disk format) so a mask written and read back hashes and
    propagates identically.

    .. container:: operations

        .. describe:: x == y

            Checks if two masks hold identical heights, pitch and bound.

    Attributes
    ----------
    heights: :class:`numpy.ndarray`
        ``(N_v, N_u)`` heights in meters, ``0 <= h <= h_max``.
    pitch: :class:`float`
        The pupil sampling pitch in meters.
    h_max: :class:`float`
        The largest allowed height in meters.
    """

    __slots__ = ("h_max", "heights", "pitch")

    def __init__(self, heights: ArrayLike, pitch: float, h_max: float) -> None:
        arr = np.asarray(heights, dtype=np.float64)
        if arr.ndim != 2:
            raise GridMismatchError("(N_v, N_u)", arr.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("height map holds non-finite values")
        slack = 1e-6 * h_max
        if arr.min() < -slack or arr.max() > h_max + slack:
            raise ValueError(
                f"heights must lie in [0, {h_max:.4g}] m, got [{arr.min():.4g}, {arr.max():.4g}]"
            )

        arr = np.clip(arr.astype(np.float32).astype(np.float64), 0.0, h_max)
        arr.flags.writeable = False
        self.heights = arr
        self.pitch = float(pitch)
        self.h_max = float(h_max)

    @classmethod
    def flat(cls, cfg: SimConfig) -> HeightMap:
        return cls(np.zeros(cfg.pupil_res), cfg.pupil_pitch, cfg.doe_h_max)

    @classmethod
    def from_config(cls, heights: ArrayLike, cfg: SimConfig) -> HeightMap:
        arr = np.asarray(heights, dtype=np.float64)
        if arr.shape != cfg.pupil_res:
            raise GridMismatchError(cfg.pupil_res, arr.shape)
        return cls(arr, cfg.pupil_pitch, cfg.doe_h_max)

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape  # pyright: ignore[reportReturnType]

    def digest(self) -> str:
        """:class:`str` SHA-256 over the float32 heights, shape, pitch and bound. This is the "mask hash"."""

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.heights, dtype="<f4").tobytes())
        h.update(repr((self.shape, self.pitch, self.h_max)).encode())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HeightMap):
            return NotImplemented
        return (
            self.pitch == other.pitch
            and self.h_max == other.h_max
            and np.array_equal(self.heights, other.heights)
        )

    def __hash__(self) -> int:
        return hash(self.digest())

    def __repr__(self) -> str:
        return f"<HeightMap shape={self.shape} pitch={self.pitch:.3g} max={self.heights.max():.3g}>"


class PupilField:
    r"""The complex amplitude leaving the pupil at one wavelength.

    Attributes
    ----------
    field: :class:`numpy.ndarray`
        ``(N_v, N_u)`` complex amplitude, ``|field| <= 1`` and zero outside the aperture.
    wavelength: :class:`float`
        In meters.
    pitch: :class:`float`
        Pupil sampling pitch in meters.
    """

    __slots__ = ("field", "pitch", "wavelength")

    def __init__(self, field: NDArray[np.complex128], wavelength: float, pitch: float) -> None:
        self.field = field
        self.wavelength = wavelength
        self.pitch = pitch

    def __repr__(self) -> str:
        return f"<PupilField shape={self.field.shape} wavelength={self.wavelength * 1e9:.1f}nm>"


def pupil_coordinates(cfg: SimConfig) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Cell-centered ``(v, u)`` sample coordinates of the pupil grid in meters."""

    n_v, n_u = cfg.pupil_res
    v = (np.arange(n_v) - (n_v - 1) / 2) * cfg.pupil_pitch
    u = (np.arange(n_u) - (n_u - 1) / 2) * cfg.pupil_pitch
    return v, u


@cached_callable("aperture", maxsize=16)
def aperture_mask(cfg: SimConfig) -> NDArray[np.bool_]:
    r"""The hard-edged circular aperture ``r <= W_a/2`` on the pupil grid.

    Raises
    ------
    ApertureTooLarge
        The pupil grid is narrower than the aperture on either axis.
    """

    extent = min(cfg.pupil_res) * cfg.pupil_pitch
    if extent < cfg.aperture_diameter * (1 - 1e-12):
        raise ApertureTooLarge(extent, cfg.aperture_diameter)

    v, u = pupil_coordinates(cfg)
    radius = cfg.aperture_diameter / 2
    mask = v[:, None] ** 2 + u[None, :] ** 2 <= radius**2
    mask.flags.writeable = False
    log.debug("Aperture covers %d of %d pupil samples", mask.sum(), mask.size)
    return mask


def doe_phase(h: HeightMap | NDArray[np.float64], wavelength: float, cfg: SimConfig) -> NDArray[np.float64]:
    """Phase delay ``(2π/λ)·Δn(λ)·h`` in radians."""

    heights = h.heights if isinstance(h, HeightMap) else np.asarray(h, dtype=np.float64)
    return (2 * np.pi / wavelength) * float(cfg.delta_n(wavelength)) * heights


def pupil_function(h: HeightMap | NDArray[np.float64], wavelength: float, cfg: SimConfig) -> PupilField:
    r"""Builds ``A·exp(iφ)`` for a mask at one wavelength.

    Raises
    ------
    ApertureTooLarge
        The pupil grid does not cover the aperture.
    GridMismatchError
        The mask is not sampled on the configured pupil grid.
    """

    mask = aperture_mask(cfg)
    heights = h.heights if isinstance(h, HeightMap) else np.asarray(h, dtype=np.float64)
    if heights.shape != mask.shape:
        raise GridMismatchError(mask.shape, heights.shape)
    field = np.where(mask, np.exp(1j * doe_phase(heights, wavelength, cfg)), 0)
    return PupilField(field, wavelength, cfg.pupil_pitch)


class Propagator:
    r"""Pupil to focal plane propagation at one wavelength, as a separable scaled Fourier transform.

    The lens cancels the quadratic Fresnel phase at the focal plane, so the field there is the pupil field's
    Fourier transform evaluated at spatial frequencies ``x/(λf)``. Sampling those frequencies directly on the
    sensor grid maps pitch ``Δu`` to pitch ``Δx`` without interpolation: one matrix product per axis,
    ``X = A_y · P · A_xᵀ``. The adjoint is the conjugate-transposed pair, which gives exact gradients.

    The intensity is scaled by ``η = (Δx·Δu/(λf))² / N_clear`` so a clear aperture carries unit energy over
    one full alias period of the transform.

    Raises
    ------
    PropagationError
        The sensor window is wider than one alias period ``λf/Δu``.
    """

    __slots__ = ("ax", "ay", "eta", "n_clear", "wavelength")

    def __init__(self, cfg: SimConfig, wavelength: float) -> None:
        n_v, n_u = cfg.pupil_res
        n_y, n_x = cfg.sensor_res
        lam_f = wavelength * cfg.focal_length

        for n_sensor, n_pupil in ((n_x, n_u), (n_y, n_v)):
            fraction = cfg.sensor_pitch * n_sensor * cfg.pupil_pitch / lam_f
            if fraction > 1 + ALIAS_TOLERANCE:
                native = lam_f / (n_pupil * cfg.pupil_pitch)
                raise PropagationError(cfg.sensor_pitch * n_sensor / native, n_pupil, wavelength)

        v, u = pupil_coordinates(cfg)
        y = (np.arange(n_y) - n_y // 2) * cfg.sensor_pitch
        x = (np.arange(n_x) - n_x // 2) * cfg.sensor_pitch
        self.ax = np.exp((-2j * np.pi / lam_f) * np.outer(x, u))
        self.ay = np.exp((-2j * np.pi / lam_f) * np.outer(y, v))
        self.n_clear = int(aperture_mask(cfg).sum())
        self.eta = (cfg.sensor_pitch * cfg.pupil_pitch / lam_f) ** 2 / self.n_clear
        self.wavelength = wavelength

    def field(self, pupil: NDArray[np.complex128]) -> NDArray[np.complex128]:
        return self.ay @ pupil @ self.ax.T

    def intensity(self, pupil: NDArray[np.complex128]) -> NDArray[np.float64]:
        out = self.field(pupil)
        return (out.real**2 + out.imag**2) * self.eta

    def adjoint(self, grad_field: NDArray[np.complex128]) -> NDArray[np.complex128]:
        """Applies the conjugate transpose of :meth:`field` to a focal-plane array."""
        return self.ay.conj().T @ grad_field @ self.ax.conj()

    def total_energy(self, pupil: NDArray[np.complex128]) -> float:
        """Energy over one full alias period, ``Σ|P|²/N_clear`` by Parseval."""
        return float(np.sum(np.abs(pupil) ** 2)) / self.n_clear


def propagate_psf(pupil: PupilField, cfg: SimConfig) -> NDArray[np.float64]:
    """The normalized focal-plane intensity of ``pupil`` on the ``(N_y, N_x)`` sensor grid."""

    return Propagator(cfg, pupil.wavelength).intensity(pupil.field)


class PsfStack:
    r"""Per-band sensor-grid PSFs of one mask, with cached peaks and energies.

    Attributes
    ----------
    psfs: :class:`numpy.ndarray`
        ``(bands, N_y, N_x)`` intensities, normalized so the clear aperture carries unit energy per band.
    grid: :class:`~dazzlesim.config.WavelengthGrid`
        The band centers.
    pitch: :class:`float`
        Sensor pitch in meters.
    peaks: :class:`numpy.ndarray`
        Per-band maximum of ``psfs``.
    energies: :class:`numpy.ndarray`
        Per-band sum over the sensor window.
    total_energies: :class:`numpy.ndarray`
        Per-band energy over one full alias period of the transform (the unbounded grid).
    config_hash: :class:`str`
        Digest of the config the stack was built with.
    mask_hash: :class:`str`
        Digest of the mask.
    """

    __slots__ = ("config_hash", "energies", "grid", "mask_hash", "peaks", "pitch", "psfs", "total_energies")

    def __init__(
        self,
        psfs: NDArray[np.float64],
        grid: WavelengthGrid,
        pitch: float,
        *,
        total_energies: ArrayLike,
        config_hash: str,
        mask_hash: str,
    ) -> None:
        if psfs.ndim != 3 or psfs.shape[0] != len(grid):
            raise GridMismatchError((len(grid), "N_y", "N_x"), psfs.shape)
        psfs.flags.writeable = False
        self.psfs = psfs
        self.grid = grid
        self.pitch = pitch
        self.peaks = psfs.max(axis=(1, 2))
        self.energies = psfs.sum(axis=(1, 2))
        self.total_energies = np.asarray(total_energies, dtype=np.float64)
        self.config_hash = config_hash
        self.mask_hash = mask_hash

    @property
    def shape(self) -> tuple[int, int]:
        return self.psfs.shape[1:]  # pyright: ignore[reportReturnType]

    def band_index(self, wavelength: float) -> int:
        return self.grid.index_of(wavelength)

    def psf(self, wavelength: float) -> NDArray[np.float64]:
        return self.psfs[self.band_index(wavelength)]

    def __len__(self) -> int:
        return self.psfs.shape[0]

    def __repr__(self) -> str:
        return f"<PsfStack bands={len(self)} shape={self.shape} mask={self.mask_hash[:12]}>"


def build_psf_stack(h: HeightMap, cfg: SimConfig, *, workers: int | None = 1) -> PsfStack:
    r"""Propagates ``h`` at every band of the config's grid.

    Parameters
    ----------
    h: :class:`HeightMap`
        The mask.
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    workers: Optional[:class:`int`]
        Size of the thread pool the bands are spread over. ``None`` uses the executor's default. Bands are
        independent so the result does not depend on it.
    """

    grid = cfg.grid

    def one(wavelength: float) -> tuple[NDArray[np.float64], float]:
        prop = Propagator(cfg, wavelength)
        pupil = pupil_function(h, wavelength, cfg).field
        return prop.intensity(pupil), prop.total_energy(pupil)

    if workers == 1:
        results = [one(float(lam)) for lam in grid.lambdas]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, (float(lam) for lam in grid.lambdas)))

    stack = PsfStack(
        np.stack([psf for psf, _ in results]),
        grid,
        cfg.sensor_pitch,
        total_energies=[energy for _, energy in results],
        config_hash=cfg.digest(),
        mask_hash=h.digest(),
    )
    log.debug("Built %r", stack)
    return stack


@cached_callable("psf", maxsize=4)
def uncoded_psf_stack(cfg: SimConfig) -> PsfStack:
    """The clear-aperture (``h ≡ 0``) stack of ``cfg``, cached per config."""
    return build_psf_stack(HeightMap.flat(cfg), cfg)


def otf(psf: NDArray[np.float64], *, centered: bool = True) -> NDArray[np.complex128]:
    r"""Forward Fourier transform of one PSF or a ``(bands, N_y, N_x)`` stack over its last two axes.

    With ``centered`` the optical axis (index ``N//2``) is moved to the origin first, so the transfer
    function carries no linear phase. The zero-frequency value is the PSF energy either way.
    """

    arr = np.asarray(psf, dtype=np.float64)
    if centered:
        arr = np.fft.ifftshift(arr, axes=(-2, -1))
    return np.fft.fft2(arr, axes=(-2, -1))


def smooth_heights(theta: NDArray[np.float64], sigma: float) -> NDArray[np.float64]:
    """Gaussian smoothing of a height field with periodic borders. The operator is self-adjoint."""

    if sigma <= 0:
        return theta
    return gaussian_filter(theta, sigma, mode="wrap")
