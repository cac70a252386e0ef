from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
from scipy.ndimage import fourier_shift
from scipy.signal import fftconvolve

from .base_object import Base
from .caching import cached_callable
from .config import CONSTANTS
from .errors import GridMismatchError, ShiftOutOfRange
from .metrics import i_sat
from .optics import build_psf_stack, uncoded_psf_stack
from .spectral import (
    LASER_FWHM,
    SpectralCube,
    SpectralCurve,
    channel_weights,
    daylight_illuminant,
    identity_illuminant,
    laser_profile,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from ._types.scenario import (
        RawIlluminationSpec,
        RawLaserSpec,
        RawNoiseSpec,
        RawScenario,
    )
    from .config import SimConfig, WavelengthGrid
    from .optics import HeightMap, PsfStack

log = logging.getLogger(__name__)

__all__ = (
    "DAMAGE_THRESHOLD",
    "FlareParams",
    "IlluminationSpec",
    "LaserSpec",
    "NoiseSpec",
    "Scenario",
    "SensorImage",
    "add_flare",
    "background_scale",
    "digitize",
    "expose",
    "laser_irradiance",
    "laser_scale",
    "photons",
    "sample_electrons",
    "scene_irradiance",
    "sensor_weights",
)

DAMAGE_THRESHOLD = 1e6
IlluminantName = Literal["d65", "flat"]


class LaserSpec(Base["RawLaserSpec"]):
    r"""A laser source aimed at the camera.

    Attributes
    ----------
    lambda_l: :class:`float`
        Central wavelength in meters.
    alpha_l: :class:`float`
        Strength in multiples of the single-pixel saturation level of the clear-aperture system.
    incidence: tuple[:class:`float`, :class:`float`]
        Small-angle direction components ``(n_u, n_v)``. The footprint lands ``f·n`` away from the axis.
    fwhm: :class:`float`
        Spectral line width in meters.
    """

    __slots__ = ("alpha_l", "fwhm", "incidence", "lambda_l")

    def __init__(
        self,
        lambda_l: float,
        alpha_l: float,
        incidence: tuple[float, float] | list[float] = (0.0, 0.0),
        fwhm: float = LASER_FWHM,
    ) -> None:
        if alpha_l < 0 or not math.isfinite(alpha_l):
            raise ValueError(f"alpha_l must be finite and non-negative, got {alpha_l!r}")
        if fwhm <= 0:
            raise ValueError("fwhm must be positive")
        self.lambda_l = float(lambda_l)
        self.alpha_l = float(alpha_l)
        self.incidence = (float(incidence[0]), float(incidence[1]))
        self.fwhm = float(fwhm)

    def shift_px(self, cfg: SimConfig) -> tuple[float, float]:
        """The footprint offset ``(Δl_y, Δl_x)`` in sensor pixels."""

        n_u, n_v = self.incidence
        scale = cfg.focal_length / cfg.sensor_pitch
        return n_v * scale, n_u * scale

    @property
    def damage_risk(self) -> bool:
        return self.alpha_l > DAMAGE_THRESHOLD


class IlluminationSpec(Base["RawIlluminationSpec"]):
    r"""The background illumination of the scene.

    Attributes
    ----------
    alpha_b: :class:`float`
        Peak scene irradiance of the clear-aperture system in multiples of ``I_sat``.
    illuminant: :class:`str`
        ``"d65"`` (daylight) or ``"flat"``.
    """

    __slots__ = ("alpha_b", "illuminant")

    def __init__(self, alpha_b: float, illuminant: IlluminantName = "d65") -> None:
        if alpha_b < 0 or not math.isfinite(alpha_b):
            raise ValueError(f"alpha_b must be finite and non-negative, got {alpha_b!r}")
        if illuminant not in ("d65", "flat"):
            raise ValueError(f"unknown illuminant {illuminant!r}")
        self.alpha_b = float(alpha_b)
        self.illuminant: IlluminantName = illuminant

    def curve(self, grid: WavelengthGrid) -> SpectralCurve:
        if self.illuminant == "flat":
            return identity_illuminant(grid)
        return daylight_illuminant(grid)


class NoiseSpec(Base["RawNoiseSpec"]):
    r"""Sensor noise parameters and switches.

    Attributes
    ----------
    c1: :class:`float`
        Photon-mean modulation. Only applied when ``literal_c1`` is set; otherwise the photon mean is kept.
    c2: :class:`float`
        Photon-noise standard deviation scale.
    mu_c: :class:`float`
        Mean dark current in electrons (Poisson).
    mu_r: :class:`float`
        Read noise mean in electrons.
    sigma_r: :class:`float`
        Read noise standard deviation in electrons.
    photon: :class:`bool`
        Enables photon noise.
    dark: :class:`bool`
        Enables dark current.
    read: :class:`bool`
        Enables read noise.
    quantization: :class:`bool`
        Enables the uniform quantization dither.
    literal_c1: :class:`bool`
        Uses ``c1`` as the photon-mean scale.
    """

    __slots__ = ("c1", "c2", "dark", "literal_c1", "mu_c", "mu_r", "photon", "quantization", "read", "sigma_r")

    def __init__(
        self,
        c1: float = 0.0,
        c2: float = 1.0,
        mu_c: float = 0.002,
        mu_r: float = 390.0,
        sigma_r: float = 10.5,
        photon: bool = True,
        dark: bool = True,
        read: bool = True,
        quantization: bool = True,
        literal_c1: bool = False,
    ) -> None:
        if c2 < 0:
            raise ValueError("c2 must not be negative")
        if sigma_r < 0:
            raise ValueError("sigma_r must not be negative")
        if mu_c < 0:
            raise ValueError("mu_c must not be negative")
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.mu_c = float(mu_c)
        self.mu_r = float(mu_r)
        self.sigma_r = float(sigma_r)
        self.photon = bool(photon)
        self.dark = bool(dark)
        self.read = bool(read)
        self.quantization = bool(quantization)
        self.literal_c1 = bool(literal_c1)

    @classmethod
    def from_config(cls, cfg: SimConfig, **overrides: Any) -> NoiseSpec:
        values: dict[str, Any] = {
            "mu_c": cfg.dark_current,
            "mu_r": cfg.read_noise_mean,
            "sigma_r": cfg.read_noise_std,
        }
        return cls(**{**values, **overrides})

    @classmethod
    def disabled(cls) -> NoiseSpec:
        return cls(photon=False, dark=False, read=False, quantization=False)

    @property
    def mean_scale(self) -> float:
        return self.c1 if self.literal_c1 else 1.0


class Scenario(Base["RawScenario"]):
    r"""Everything besides the scene and the mask that determines one capture.

    Attributes
    ----------
    laser: :class:`LaserSpec`
    illumination: :class:`IlluminationSpec`
    noise: :class:`NoiseSpec`
    exposure_time: :class:`float`
        In seconds.
    """

    __slots__ = ("exposure_time", "illumination", "laser", "noise")

    def __init__(
        self,
        laser: LaserSpec,
        illumination: IlluminationSpec,
        noise: NoiseSpec,
        exposure_time: float,
    ) -> None:
        if exposure_time <= 0:
            raise ValueError("exposure_time must be positive")
        self.laser = laser
        self.illumination = illumination
        self.noise = noise
        self.exposure_time = float(exposure_time)

    def to_dict(self) -> RawScenario:
        return {
            "laser": self.laser.to_dict(),
            "illumination": self.illumination.to_dict(),
            "noise": self.noise.to_dict(),
            "exposure_time": self.exposure_time,
            "damage_risk": self.laser.damage_risk,
        }

    @classmethod
    def from_dict(cls, data: RawScenario) -> Scenario:
        return cls(
            LaserSpec.from_dict(data["laser"]),
            IlluminationSpec.from_dict(data["illumination"]),
            NoiseSpec.from_dict(data["noise"]),
            data["exposure_time"],
        )


class FlareParams(Base[dict[str, Any]]):
    r"""Shape of the procedural lens flare.

    Lengths are in sensor pixels. The streak, halo and haze weights are relative and renormalized.
    """

    __slots__ = (
        "fraction",
        "halo_sigma",
        "halo_weight",
        "haze_sigma",
        "haze_weight",
        "streak_length",
        "streak_weight",
        "streak_width",
        "streaks_max",
        "streaks_min",
    )

    def __init__(
        self,
        fraction: float = 0.05,
        streaks_min: int = 4,
        streaks_max: int = 12,
        streak_length: float = 32.0,
        streak_width: float = 0.8,
        streak_weight: float = 0.5,
        halo_sigma: float = 6.0,
        halo_weight: float = 0.35,
        haze_sigma: float = 40.0,
        haze_weight: float = 0.15,
    ) -> None:
        if not 0 <= fraction <= 1:
            raise ValueError("flare fraction must lie in [0, 1]")
        if not 1 <= streaks_min <= streaks_max:
            raise ValueError("streak counts must satisfy 1 <= min <= max")
        self.fraction = fraction
        self.streaks_min = streaks_min
        self.streaks_max = streaks_max
        self.streak_length = streak_length
        self.streak_width = streak_width
        self.streak_weight = streak_weight
        self.halo_sigma = halo_sigma
        self.halo_weight = halo_weight
        self.haze_sigma = haze_sigma
        self.haze_weight = haze_weight

    @classmethod
    def from_config(cls, cfg: SimConfig, **overrides: Any) -> FlareParams:
        n = min(cfg.sensor_res)
        values: dict[str, Any] = {
            "fraction": cfg.flare_fraction,
            "streak_length": 0.25 * n,
            "halo_sigma": max(0.05 * n, 1.0),
            "haze_sigma": 0.3 * n,
        }
        return cls(**{**values, **overrides})


class SensorImage:
    r"""Digital counts of one capture together with what produced them.

    Attributes
    ----------
    counts: :class:`numpy.ndarray`
        ``(N_y, N_x, 3)`` integer counts in ``[0, 2**bpc - 1]``.
    bpc: :class:`int`
        Bits per channel.
    scenario: :class:`Scenario`
        The capture parameters.
    seed: :class:`int`
        The seed the noise and flare were drawn from.
    config_hash: :class:`str`
        Digest of the config.
    mask_hash: :class:`str`
        Digest of the mask.
    background_scale: :class:`float`
        The radiometric scale applied to the normalized scene, recorded as exposure metadata.
    """

    __slots__ = ("background_scale", "bpc", "config_hash", "counts", "mask_hash", "scenario", "seed")

    def __init__(
        self,
        counts: NDArray[np.integer[Any]],
        *,
        bpc: int,
        scenario: Scenario,
        seed: int,
        config_hash: str,
        mask_hash: str,
        background_scale: float,
    ) -> None:
        s_sat = 2**bpc - 1
        if counts.ndim != 3 or counts.shape[2] != 3:
            raise GridMismatchError("(N_y, N_x, 3)", counts.shape)
        if counts.min(initial=0) < 0 or counts.max(initial=0) > s_sat:
            raise ValueError(f"counts must lie in [0, {s_sat}]")
        self.counts = counts.astype(np.uint16 if bpc <= 16 else np.uint32, copy=False)
        self.bpc = bpc
        self.scenario = scenario
        self.seed = seed
        self.config_hash = config_hash
        self.mask_hash = mask_hash
        self.background_scale = background_scale

    @property
    def s_sat(self) -> int:
        return 2**self.bpc - 1

    @property
    def saturation_mask(self) -> NDArray[np.bool_]:
        """``(N_y, N_x, 3)`` mask of counts at ``s_sat``."""
        return self.counts == self.s_sat

    @property
    def saturated_pixels(self) -> int:
        """Number of pixels with at least one saturated channel."""
        return int(np.any(self.saturation_mask, axis=2).sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SensorImage):
            return NotImplemented
        return (
            np.array_equal(self.counts, other.counts)
            and self.seed == other.seed
            and self.scenario == other.scenario
            and self.config_hash == other.config_hash
            and self.mask_hash == other.mask_hash
        )

    __hash__ = None  # pyright: ignore[reportAssignmentType]

    def __repr__(self) -> str:
        return f"<SensorImage shape={self.counts.shape} seed={self.seed} saturated={self.saturated_pixels}>"


@cached_callable("weights")
def sensor_weights(grid: WavelengthGrid) -> NDArray[np.float64]:
    """``(3, bands)`` weights the sensor applies to per-band photon rates."""
    return channel_weights(identity_illuminant(grid))


def _frame(
    scene_shape: tuple[int, int], cfg: SimConfig, crop: bool
) -> tuple[tuple[int, int], tuple[int, int]]:
    n_y, n_x = cfg.sensor_res
    if crop:
        return (n_y, n_x), (n_y // 2, n_x // 2)
    h_o, w_o = scene_shape
    return (h_o + n_y - 1, w_o + n_x - 1), (h_o // 2 + n_y // 2, w_o // 2 + n_x // 2)


def _crop_slices(scene_shape: tuple[int, int], cfg: SimConfig) -> tuple[slice, slice]:
    n_y, n_x = cfg.sensor_res
    _, (ay, ax) = _frame(scene_shape, cfg, crop=False)
    return slice(ay - n_y // 2, ay - n_y // 2 + n_y), slice(ax - n_x // 2, ax - n_x // 2 + n_x)


def _convolve(b: SpectralCube, psf: PsfStack) -> NDArray[np.float64]:
    kernel = np.moveaxis(psf.psfs, 0, -1)
    out = fftconvolve(b.data, kernel, mode="full", axes=(0, 1))
    return np.clip(out, 0, None)


def _check_scene(b: SpectralCube, psf: PsfStack) -> None:
    if b.grid != psf.grid:
        raise GridMismatchError(psf.grid, b.grid)


def background_scale(
    b: SpectralCube,
    illum: IlluminationSpec,
    cfg: SimConfig,
    *,
    uncoded: PsfStack | None = None,
    exposure_time: float | None = None,
) -> float:
    r"""The factor that brings the clear-aperture peak of ``conv(b, PSF)·T_b`` to ``α_b·I_sat``.

    The peak is taken over every band and pixel of the sensor window, each band relative to its own
    ``I_sat(λ)``; the band that attains it is the reference band. A black scene yields ``0``.
    """

    uncoded = uncoded_psf_stack(cfg) if uncoded is None else uncoded
    _check_scene(b, uncoded)
    if illum.alpha_b == 0 or not np.any(b.data):
        return 0.0

    rows, cols = _crop_slices((b.height, b.width), cfg)
    weight = illum.curve(b.grid).values / i_sat(b.grid.lambdas, cfg, exposure_time=exposure_time)
    window = _convolve(b, uncoded)[rows, cols] * weight[None, None, :]
    peak = float(window.max())
    if peak <= 0:
        return 0.0
    ref = int(np.argmax(window.max(axis=(0, 1))))
    log.debug("Background reference band %.1f nm", b.grid.nm[ref])
    return illum.alpha_b / peak


def scene_irradiance(
    b: SpectralCube,
    psf: PsfStack,
    illum: IlluminationSpec,
    cfg: SimConfig,
    *,
    uncoded: PsfStack | None = None,
    exposure_time: float | None = None,
    scale: float | None = None,
    crop: bool = False,
) -> SpectralCube:
    r"""Per-band background irradiance on the sensor plane, ``conv(b_λ, PSF_λ)·T_b(λ)`` times the background scale.

    Parameters
    ----------
    b: :class:`~dazzlesim.spectral.SpectralCube`
        The scene, normalized to [0, 1].
    psf: :class:`~dazzlesim.optics.PsfStack`
        The coded stack.
    illum: :class:`IlluminationSpec`
        Strength and spectrum of the illumination.
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    uncoded: Optional[:class:`~dazzlesim.optics.PsfStack`]
        The clear-aperture stack. Built (and cached) from ``cfg`` when omitted.
    exposure_time: Optional[:class:`float`]
        Overrides ``cfg.exposure_time`` in ``I_sat``.
    scale: Optional[:class:`float`]
        A precomputed :func:`background_scale`.
    crop: :class:`bool`
        Return only the ``(N_y, N_x)`` sensor window instead of the full linear convolution frame.

    Raises
    ------
    GridMismatchError
        The scene and the stack use different grids.
    """

    _check_scene(b, psf)
    if scale is None:
        scale = background_scale(b, illum, cfg, uncoded=uncoded, exposure_time=exposure_time)

    shape, _ = _frame((b.height, b.width), cfg, crop)
    if scale == 0:
        return SpectralCube(np.zeros((*shape, b.bands)), b.grid, validate=False)

    out = _convolve(b, psf)
    if crop:
        rows, cols = _crop_slices((b.height, b.width), cfg)
        out = out[rows, cols]
    out *= (illum.curve(b.grid).values * scale)[None, None, :]
    return SpectralCube(out, b.grid, validate=False)


def laser_scale(
    laser: LaserSpec,
    psf_uncoded: PsfStack,
    cfg: SimConfig,
    *,
    exposure_time: float | None = None,
) -> float:
    r"""The factor that makes the clear-aperture laser footprint fill ``α_l`` full wells at its brightest
    pixel and channel.

    The sensor response is evaluated through the same channel projection as :func:`expose`, so ``α_l = 1``
    drives exactly the brightest pixel to the full well.

    Raises
    ------
    ValueError
        The laser line has no response in any channel.
    """

    grid = psf_uncoded.grid
    if laser.alpha_l == 0:
        return 0.0
    t_l = laser_profile(laser.lambda_l, grid, fwhm=laser.fwhm).values
    per_band = t_l / i_sat(grid.lambdas, cfg, exposure_time=exposure_time)
    response = np.einsum("cb,b,byx->cyx", sensor_weights(grid), per_band, psf_uncoded.psfs)
    peak = float(response.max())
    if peak <= 0:
        raise ValueError(f"laser at {laser.lambda_l * 1e9:.1f} nm produces no sensor response")
    return laser.alpha_l / peak


def _place(
    frame: NDArray[np.float64], kernel: NDArray[np.float64], center: tuple[int, int]
) -> None:
    # adds kernel (its own center at shape//2) to frame at center, dropping what falls outside
    ky, kx = kernel.shape
    top, left = center[0] - ky // 2, center[1] - kx // 2
    fy0, fx0 = max(top, 0), max(left, 0)
    fy1, fx1 = min(top + ky, frame.shape[0]), min(left + kx, frame.shape[1])
    if fy0 >= fy1 or fx0 >= fx1:
        return
    frame[fy0:fy1, fx0:fx1] += kernel[fy0 - top : fy1 - top, fx0 - left : fx1 - left]


def _subpixel(psf: NDArray[np.float64], frac: tuple[float, float]) -> NDArray[np.float64]:
    if frac == (0.0, 0.0):
        return psf
    pad_y, pad_x = psf.shape[0] // 2, psf.shape[1] // 2
    padded = np.pad(psf, ((pad_y, pad_y), (pad_x, pad_x)))
    shifted = np.fft.ifft2(fourier_shift(np.fft.fft2(padded), frac)).real
    return np.clip(shifted, 0, None)


def laser_irradiance(
    laser: LaserSpec,
    psf: PsfStack,
    psf_uncoded: PsfStack,
    cfg: SimConfig,
    *,
    scene_shape: tuple[int, int] | None = None,
    exposure_time: float | None = None,
    crop: bool = False,
) -> SpectralCube:
    r"""Per-band laser irradiance: the coded PSF moved to the footprint, weighted by the laser line, scaled by
    :func:`laser_scale`.

    Parameters
    ----------
    laser: :class:`LaserSpec`
        The source.
    psf: :class:`~dazzlesim.optics.PsfStack`
        The coded stack.
    psf_uncoded: :class:`~dazzlesim.optics.PsfStack`
        The clear-aperture stack of the same config.
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    scene_shape: Optional[tuple[:class:`int`, :class:`int`]]
        Size of the scene the frame is built for. Defaults to the sensor resolution.
    exposure_time: Optional[:class:`float`]
        Overrides ``cfg.exposure_time``.
    crop: :class:`bool`
        Return only the sensor window.

    Raises
    ------
    ShiftOutOfRange
        The footprint is more than one sensor extent away from the axis.
    WavelengthOutOfRange
        The laser line lies outside the grid.
    """

    grid = psf.grid
    if psf_uncoded.grid != grid:
        raise GridMismatchError(grid, psf_uncoded.grid)

    n_y, n_x = cfg.sensor_res
    shift = laser.shift_px(cfg)
    if abs(shift[0]) > n_y or abs(shift[1]) > n_x:
        raise ShiftOutOfRange(shift, float(min(n_y, n_x)))

    shape, axis = _frame(scene_shape or cfg.sensor_res, cfg, crop)
    out = np.zeros((*shape, len(grid)))
    scale = laser_scale(laser, psf_uncoded, cfg, exposure_time=exposure_time)
    if scale == 0:
        return SpectralCube(out, grid, validate=False)

    whole = (round(shift[0]), round(shift[1]))
    frac = (shift[0] - whole[0], shift[1] - whole[1])
    center = (axis[0] + whole[0], axis[1] + whole[1])
    t_l = laser_profile(laser.lambda_l, grid, fwhm=laser.fwhm).values

    for i in np.flatnonzero(t_l > 1e-12):
        frame = np.zeros(shape)
        _place(frame, _subpixel(psf.psfs[i], frac), center)
        out[:, :, i] = frame * (t_l[i] * scale)

    if laser.damage_risk:
        log.warning("Laser strength %.3g exceeds the sensor damage threshold", laser.alpha_l)
    return SpectralCube(out, grid, validate=False)


def _flare_template(
    shape: tuple[int, int], center: tuple[float, float], params: FlareParams, rng: np.random.Generator
) -> NDArray[np.float64]:
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]].astype(np.float64)
    dy, dx = yy - center[0], xx - center[1]
    r2 = dy**2 + dx**2
    r = np.sqrt(r2)

    streaks = np.zeros(shape)
    count = int(rng.integers(params.streaks_min, params.streaks_max + 1))
    for angle in rng.uniform(0, 2 * np.pi, size=count):
        along = dx * np.cos(angle) + dy * np.sin(angle)
        across = -dx * np.sin(angle) + dy * np.cos(angle)
        length = params.streak_length * rng.uniform(0.5, 1.5)
        streaks += np.where(
            along >= 0,
            np.exp(-along / length) * np.exp(-0.5 * (across / params.streak_width) ** 2),
            0,
        )

    parts = (
        (params.streak_weight, streaks),
        (params.halo_weight, np.exp(-0.5 * r2 / params.halo_sigma**2)),
        (params.haze_weight, 1 / (1 + r / params.haze_sigma) ** 3),
    )
    template = np.zeros(shape)
    weights = sum(w for w, _ in parts)
    for weight, part in parts:
        total = part.sum()
        if total > 0 and weight > 0:
            template += (weight / weights) * part / total
    return template


def add_flare(
    irradiance: SpectralCube,
    laser: LaserSpec,
    params: FlareParams,
    rng: np.random.Generator,
    cfg: SimConfig,
    *,
    laser_cube: SpectralCube | None = None,
) -> SpectralCube:
    r"""Adds procedural lens flare around the laser footprint.

    The flare is a random number of radial streaks, a Gaussian halo and a faint haze, normalized to unit sum
    over the frame. Each band receives ``params.fraction`` times that band's laser energy, which carries the
    laser's spectral weighting.

    Parameters
    ----------
    irradiance: :class:`~dazzlesim.spectral.SpectralCube`
        The frame to add flare to.
    laser: :class:`LaserSpec`
        The laser whose footprint the flare is centered on.
    params: :class:`FlareParams`
        Flare shape.
    rng: :class:`numpy.random.Generator`
        Source of the streak count, angles and lengths.
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    laser_cube: Optional[:class:`~dazzlesim.spectral.SpectralCube`]
        The laser-only irradiance on the same frame; its band energies set the flare energy. When omitted,
        ``irradiance`` is taken to be laser-only.
    """

    source = irradiance if laser_cube is None else laser_cube
    energies = source.data.sum(axis=(0, 1))
    if params.fraction == 0 or laser.alpha_l == 0 or not np.any(energies):
        return irradiance

    shape = (irradiance.height, irradiance.width)
    shift = laser.shift_px(cfg)
    center = ((shape[0] // 2) + shift[0], (shape[1] // 2) + shift[1])
    template = _flare_template(shape, center, params, rng)
    flare = template[:, :, None] * (params.fraction * energies)[None, None, :]
    return SpectralCube(irradiance.data + flare, irradiance.grid, validate=False)


def photons(
    irradiance: SpectralCube, cfg: SimConfig, *, exposure_time: float | None = None
) -> SpectralCube:
    """Mean photon count per pixel and band over the exposure, ``I·λ·t·Δx²/(h·c)``."""

    t = cfg.exposure_time if exposure_time is None else exposure_time
    factor = irradiance.grid.lambdas * t * cfg.sensor_pitch**2 / (CONSTANTS.planck * CONSTANTS.light_speed)
    return SpectralCube(irradiance.data * factor[None, None, :], irradiance.grid, validate=False)


def sample_electrons(
    mu: NDArray[np.float64], noise: NoiseSpec, cfg: SimConfig, rng: np.random.Generator
) -> NDArray[np.float64]:
    r"""Pre-gain electrons for per-channel mean photon counts ``mu``.

    Photons are drawn from ``N(mean_scale·μ, c2·√μ)``, converted with the quantum efficiency, then dark
    current (Poisson) and read noise (Gaussian) are added. Nothing is clipped here.
    """

    mean = noise.mean_scale * mu
    if noise.photon:
        omega = rng.normal(mean, noise.c2 * np.sqrt(mu))
    else:
        omega = mean
    electrons = cfg.quantum_efficiency * np.clip(omega, 0, None)
    if noise.dark:
        electrons = electrons + rng.poisson(noise.mu_c, size=mu.shape)
    if noise.read:
        electrons = electrons + rng.normal(noise.mu_r, noise.sigma_r, size=mu.shape)
    return electrons


def digitize(
    electrons: NDArray[np.float64], noise: NoiseSpec, cfg: SimConfig, rng: np.random.Generator
) -> NDArray[np.int64]:
    """Clips at the full well, applies the gain, dithers, floors and clamps to ``[0, s_sat]``."""

    e = np.clip(electrons, 0, cfg.full_well)
    dn = e / cfg.gain if cfg.gain_mode == "e_per_dn" else e * cfg.gain
    if noise.quantization:
        dn = dn + rng.uniform(-0.5, 0.5, size=dn.shape)
    return np.clip(np.floor(dn), 0, cfg.s_sat).astype(np.int64)


def expose(
    b: SpectralCube,
    h: HeightMap,
    scenario: Scenario,
    seed: int,
    cfg: SimConfig,
    *,
    psf: PsfStack | None = None,
    flare: FlareParams | None = None,
) -> SensorImage:
    r"""Simulates one capture end to end.

    Background and laser irradiance are assembled on the sensor window, flare is added, the result is turned
    into photon counts, projected to three channels, sampled with noise, converted to electrons and
    digitized.

    Parameters
    ----------
    b: :class:`~dazzlesim.spectral.SpectralCube`
        The scene on the config's grid, normalized to [0, 1].
    h: :class:`~dazzlesim.optics.HeightMap`
        The mask.
    scenario: :class:`Scenario`
        Laser, illumination, noise and exposure.
    seed: :class:`int`
        Seed of the flare and noise draws. Equal seeds give bit-identical captures.
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    psf: Optional[:class:`~dazzlesim.optics.PsfStack`]
        A prebuilt stack of ``h``.
    flare: Optional[:class:`FlareParams`]
        Flare shape. Defaults to :meth:`FlareParams.from_config`.
    """

    uncoded = uncoded_psf_stack(cfg)
    if psf is None:
        psf = build_psf_stack(h, cfg)
    elif psf.mask_hash != h.digest():
        raise GridMismatchError(h.digest()[:12], psf.mask_hash[:12])
    flare = FlareParams.from_config(cfg) if flare is None else flare
    t = scenario.exposure_time
    flare_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)

    scale = background_scale(b, scenario.illumination, cfg, uncoded=uncoded, exposure_time=t)
    background = scene_irradiance(
        b, psf, scenario.illumination, cfg, exposure_time=t, scale=scale, crop=True
    )
    laser = laser_irradiance(
        scenario.laser, psf, uncoded, cfg, scene_shape=(b.height, b.width), exposure_time=t, crop=True
    )
    laser = add_flare(laser, scenario.laser, flare, np.random.default_rng(flare_seq), cfg)

    total = SpectralCube(background.data + laser.data, b.grid, validate=False)
    p = photons(total, cfg, exposure_time=t)
    mu = np.einsum("hwb,cb->hwc", p.data, sensor_weights(b.grid))

    rng = np.random.default_rng(noise_seq)
    electrons = sample_electrons(mu, scenario.noise, cfg, rng)
    counts = digitize(electrons, scenario.noise, cfg, rng)

    image = SensorImage(
        counts,
        bpc=cfg.bpc,
        scenario=scenario,
        seed=seed,
        config_hash=cfg.digest(),
        mask_hash=h.digest(),
        background_scale=scale,
    )
    log.debug("Exposed %r", image)
    return image
