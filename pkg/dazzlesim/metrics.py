from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Literal

import numpy as np

from .base_object import Base
from .config import CONSTANTS
from .errors import DegenerateMaskError, GridMismatchError, ShapeMismatch
from .imageops import downsample_half
from .optics import build_psf_stack, uncoded_psf_stack

if TYPE_CHECKING:
    from collections.abc import Mapping

    from numpy.typing import ArrayLike, NDArray

    from ._types.report import RawQualityReport, RawSuppressionReport
    from .config import SimConfig
    from .optics import HeightMap, PsfStack

log = logging.getLogger(__name__)

__all__ = (
    "CHARBONNIER_EPS",
    "QualityReport",
    "SuppressionReport",
    "bsr",
    "charbonnier_fft",
    "compare_masks",
    "i_sat",
    "l1",
    "l_doe",
    "lsr",
    "psnr",
    "quality_report",
    "smooth_peak",
    "smooth_peak_grad",
    "suppression_report",
)

CHARBONNIER_EPS = 1e-6
LossMode = Literal["report", "smooth"]


def i_sat(wavelength: ArrayLike, cfg: SimConfig, *, exposure_time: float | None = None) -> NDArray[np.float64]:
    r"""The irradiance (W/m²) that fills the full well within one exposure, ``e_sat·h·c / (λ·t·Δx²·Q_e)``.

    Parameters
    ----------
    wavelength: ArrayLike
        One or more wavelengths in meters.
    cfg: :class:`~dazzlesim.config.SimConfig`
        Supplies ``e_sat``, ``t``, ``Δx`` and ``Q_e``.
    exposure_time: Optional[:class:`float`]
        Overrides ``cfg.exposure_time``.
    """

    lam = np.asarray(wavelength, dtype=np.float64)
    t = cfg.exposure_time if exposure_time is None else exposure_time
    return (
        cfg.full_well
        * CONSTANTS.planck
        * CONSTANTS.light_speed
        / (lam * t * cfg.sensor_pitch**2 * cfg.quantum_efficiency)
    )


def _check_pair(coded: PsfStack, uncoded: PsfStack) -> None:
    if coded.grid != uncoded.grid:
        raise GridMismatchError(uncoded.grid, coded.grid)
    if coded.config_hash != uncoded.config_hash:
        raise GridMismatchError(uncoded.config_hash[:12], coded.config_hash[:12])


def lsr(coded: PsfStack, uncoded: PsfStack, wavelength: float) -> float:
    """Laser suppression ratio: coded over uncoded PSF peak at ``wavelength``."""

    _check_pair(coded, uncoded)
    idx = uncoded.band_index(wavelength)
    return float(coded.peaks[idx] / uncoded.peaks[idx])


def bsr(coded: PsfStack, uncoded: PsfStack, wavelength: float) -> float:
    """Background suppression ratio: coded over uncoded in-sensor energy at ``wavelength``."""

    _check_pair(coded, uncoded)
    idx = uncoded.band_index(wavelength)
    return float(coded.energies[idx] / uncoded.energies[idx])


class SuppressionReport(Base["RawSuppressionReport"]):
    r"""Per-band laser and background suppression ratios of a mask.

    Attributes
    ----------
    wavelengths_nm: list[:class:`float`]
        Band centers.
    lsr: list[:class:`float`]
        Coded over uncoded peak per band.
    bsr: list[:class:`float`]
        Coded over uncoded in-sensor energy per band.
    """

    __slots__ = ("bsr", "lsr", "wavelengths_nm")

    def __init__(self, wavelengths_nm: list[float], lsr: list[float], bsr: list[float]) -> None:
        self.wavelengths_nm = wavelengths_nm
        self.lsr = lsr
        self.bsr = bsr

    @property
    def mean_lsr(self) -> float:
        return float(np.mean(self.lsr))

    @property
    def max_lsr(self) -> float:
        return float(np.max(self.lsr))

    @property
    def mean_bsr(self) -> float:
        return float(np.mean(self.bsr))

    @property
    def max_bsr(self) -> float:
        return float(np.max(self.bsr))

    def to_dict(self) -> RawSuppressionReport:
        return {
            "wavelengths_nm": list(self.wavelengths_nm),
            "lsr": list(self.lsr),
            "bsr": list(self.bsr),
            "mean_lsr": self.mean_lsr,
            "max_lsr": self.max_lsr,
            "mean_bsr": self.mean_bsr,
            "max_bsr": self.max_bsr,
        }

    @classmethod
    def from_dict(cls, data: RawSuppressionReport) -> SuppressionReport:
        return cls(list(data["wavelengths_nm"]), list(data["lsr"]), list(data["bsr"]))


def suppression_report(coded: PsfStack, uncoded: PsfStack) -> SuppressionReport:
    _check_pair(coded, uncoded)
    return SuppressionReport(
        [float(x) for x in uncoded.grid.nm],
        [float(x) for x in coded.peaks / uncoded.peaks],
        [float(x) for x in coded.energies / uncoded.energies],
    )


def _log_weights(x: NDArray[np.float64], beta: float) -> tuple[NDArray[np.float64], float]:
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    top = float(logx.max())
    if not math.isfinite(top):
        raise ValueError("smooth peak of an all-zero intensity is undefined")
    z = beta * (logx - top)
    log_mean = top + (math.log(float(np.exp(z).sum())) - math.log(x.size)) / beta
    return logx, log_mean


def smooth_peak(x: NDArray[np.float64], beta: float) -> float:
    r"""Differentiable surrogate of ``max(x)`` for a non-negative array.

    It is a log-sum-exp at temperature ``beta`` taken over ``log x`` and averaged over the samples, i.e. the
    power mean of order ``beta``. It never exceeds the hard maximum, is no smaller than
    ``max(x)·size**(-1/beta)``, and scales with ``x``, so it keeps tracking the peak at any suppression level.
    """

    _, log_mean = _log_weights(np.asarray(x, dtype=np.float64), beta)
    return math.exp(log_mean)


def smooth_peak_grad(x: NDArray[np.float64], beta: float) -> tuple[float, NDArray[np.float64]]:
    """:func:`smooth_peak` and its gradient with respect to ``x``."""

    arr = np.asarray(x, dtype=np.float64)
    logx, log_mean = _log_weights(arr, beta)
    value = math.exp(log_mean)
    # d/dx_k = value · x_k^(β-1) / Σ x^β = (x_k / value)^(β-1) / size
    grad = np.exp((beta - 1) * (logx - log_mean)) / arr.size
    return value, grad


def l_doe(
    coded: PsfStack,
    uncoded: PsfStack,
    *,
    mode: LossMode = "report",
    beta: float = 50.0,
) -> float:
    r"""The DOE objective ``Σ lsr(λ) + Σ 1/bsr(λ)``.

    In ``"smooth"`` mode the coded peaks go through :func:`smooth_peak`; ``"report"`` uses hard maxima.

    Raises
    ------
    DegenerateMaskError
        A band has zero in-sensor energy.
    """

    _check_pair(coded, uncoded)
    zero = np.flatnonzero(coded.energies <= 0)
    if zero.size:
        raise DegenerateMaskError(float(coded.grid.lambdas[zero[0]]))

    if mode == "report":
        peaks = coded.peaks
    elif mode == "smooth":
        peaks = np.array([smooth_peak(psf, beta) for psf in coded.psfs])
    else:
        raise ValueError(f"unknown loss mode {mode!r}")

    return float(np.sum(peaks / uncoded.peaks) + np.sum(uncoded.energies / coded.energies))


def _check_shapes(est: NDArray[np.float64], gt: NDArray[np.float64]) -> None:
    if est.shape != gt.shape:
        raise ShapeMismatch(gt.shape, est.shape)


def charbonnier_fft(est: ArrayLike, gt: ArrayLike, *, eps: float = CHARBONNIER_EPS) -> float:
    r"""Charbonnier plus Fourier-magnitude L1 distance at a fine and a half-resolution coarse scale.

    Both images are ``(H, W)`` or ``(H, W, C)``. The coarse scale is an antialiased bicubic half-size copy of
    each. Identical inputs give ``(N0 + N1)·√eps`` where ``N0`` and ``N1`` count the array elements at each
    scale.

    Raises
    ------
    ShapeMismatch
        The two images differ in shape.
    """

    a = np.asarray(est, dtype=np.float64)
    b = np.asarray(gt, dtype=np.float64)
    _check_shapes(a, b)

    total = 0.0
    for level in range(2):
        if level == 1:
            a = downsample_half(a)
            b = downsample_half(b)
        diff = a - b
        total += float(np.sum(np.sqrt(diff**2 + eps)))
        total += float(np.sum(np.abs(np.fft.fft2(diff, axes=(0, 1)))))
    return total


def l1(est: ArrayLike, gt: ArrayLike) -> float:
    a = np.asarray(est, dtype=np.float64)
    b = np.asarray(gt, dtype=np.float64)
    _check_shapes(a, b)
    return float(np.mean(np.abs(a - b)))


def psnr(est: ArrayLike, gt: ArrayLike, *, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB. Identical images give ``inf``."""

    a = np.asarray(est, dtype=np.float64)
    b = np.asarray(gt, dtype=np.float64)
    _check_shapes(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10 * math.log10(data_range**2 / mse)


class QualityReport(Base["RawQualityReport"]):
    r"""Reconstruction quality of an estimate against ground truth.

    Attributes
    ----------
    l1: :class:`float`
        Mean absolute error.
    psnr: :class:`float`
        In dB, ``inf`` for identical images (serialized as ``null``).
    charbonnier_fft: :class:`float`
        See :func:`charbonnier_fft`.
    """

    __slots__ = ("charbonnier_fft", "l1", "psnr")

    def __init__(self, l1: float, psnr: float | None, charbonnier_fft: float) -> None:
        self.l1 = l1
        self.psnr = math.inf if psnr is None else psnr
        self.charbonnier_fft = charbonnier_fft

    def to_dict(self) -> RawQualityReport:
        return {
            "l1": self.l1,
            "psnr": None if math.isinf(self.psnr) else self.psnr,
            "charbonnier_fft": self.charbonnier_fft,
        }


def quality_report(est: ArrayLike, gt: ArrayLike) -> QualityReport:
    return QualityReport(l1(est, gt), psnr(est, gt), charbonnier_fft(est, gt))


def compare_masks(cfg: SimConfig, masks: Mapping[str, HeightMap]) -> dict[str, SuppressionReport]:
    """Per-band suppression ratios of several masks against the clear aperture of ``cfg``."""

    uncoded = uncoded_psf_stack(cfg)
    out: dict[str, SuppressionReport] = {}
    for name, mask in masks.items():
        out[name] = suppression_report(build_psf_stack(mask, cfg), uncoded)
        log.info("%s: mean lsr %.4g, mean bsr %.4g", name, out[name].mean_lsr, out[name].mean_bsr)
    return out
