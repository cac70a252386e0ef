from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.ndimage import binary_dilation
from scipy.optimize import minimize_scalar
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import cg

from .base_object import Base
from .camera import photons, scene_irradiance, sensor_weights
from .errors import GridMismatchError, MetadataMismatch
from .metrics import charbonnier_fft
from .optics import build_psf_stack, otf
from .spectral import SpectralCube

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from ._types.config import RawRestoreParams
    from .camera import SensorImage
    from .config import SimConfig
    from .optics import HeightMap, PsfStack
    from .spectral import SpectralCurve

log = logging.getLogger(__name__)

__all__ = (
    "RestoreParams",
    "channel_otf_weights",
    "check_metadata",
    "effective_channel_otf",
    "flat_field",
    "inpaint",
    "inpaint_saturated",
    "normalize_counts",
    "restore_pipeline",
    "tune_restore_params",
    "wiener_deconvolve",
)

REG_GRID = tuple(float(x) for x in np.logspace(-5, 0, 11))


class RestoreParams(Base["RawRestoreParams"]):
    r"""Parameters of the classical restoration.

    Attributes
    ----------
    wiener_reg: tuple[:class:`float`, :class:`float`, :class:`float`]
        Per-channel Wiener regularizer.
    inpaint_iters: :class:`int`
        Iteration cap of the harmonic fill. ``0`` disables inpainting.
    inpaint_tol: :class:`float`
        Relative residual at which the fill stops.
    dilate_radius: :class:`int`
        Growth of the saturation mask in pixels.
    """

    __slots__ = ("dilate_radius", "inpaint_iters", "inpaint_tol", "wiener_reg")

    def __init__(
        self,
        wiener_reg: Sequence[float] = (1e-2, 1e-2, 1e-2),
        inpaint_iters: int = 2000,
        inpaint_tol: float = 1e-6,
        dilate_radius: int = 2,
    ) -> None:
        regs = tuple(float(r) for r in wiener_reg)
        if len(regs) != 3 or any(r <= 0 for r in regs):
            raise ValueError(f"wiener_reg needs three positive values, got {wiener_reg!r}")
        if inpaint_iters < 0 or dilate_radius < 0:
            raise ValueError("inpaint_iters and dilate_radius must not be negative")
        if inpaint_tol <= 0:
            raise ValueError("inpaint_tol must be positive")
        self.wiener_reg = regs
        self.inpaint_iters = int(inpaint_iters)
        self.inpaint_tol = float(inpaint_tol)
        self.dilate_radius = int(dilate_radius)

    def replace(self, **changes: Any) -> RestoreParams:
        return RestoreParams(**{**self.to_dict(), **changes})


def channel_otf_weights(illuminant: SpectralCurve) -> NDArray[np.float64]:
    """``(3, bands)`` per-channel band weights, each row summing to 1.

    A band counts in proportion to its channel sensitivity, the illuminant and its photon energy factor ``λ``.
    """

    grid = illuminant.grid
    weights = sensor_weights(grid) * (illuminant.values * grid.lambdas)[None, :]
    totals = weights.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError("illuminant leaves a channel without weight")
    return weights / totals


def effective_channel_otf(psf: PsfStack, illuminant: SpectralCurve) -> NDArray[np.complex128]:
    r"""The three transfer functions the sensor channels see.

    Per channel, the weighted average of the band OTFs (see :func:`channel_otf_weights`), divided by its own
    zero-frequency value so it has unit DC.

    Returns
    -------
    :class:`numpy.ndarray`
        ``(3, N_y, N_x)`` complex, optical axis at the origin.

    Raises
    ------
    GridMismatchError
        The stack and the illuminant use different grids.
    """

    if psf.grid != illuminant.grid:
        raise GridMismatchError(psf.grid, illuminant.grid)
    bands = otf(psf.psfs)
    mixed = np.einsum("cb,byx->cyx", channel_otf_weights(illuminant), bands)
    return mixed / mixed[:, :1, :1]


def _disk(radius: int) -> NDArray[np.bool_]:
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return yy**2 + xx**2 <= radius**2


def inpaint(
    x: NDArray[np.float64], mask: NDArray[np.bool_], params: RestoreParams
) -> tuple[NDArray[np.float64], bool]:
    r"""Harmonic fill of the masked pixels of an ``(H, W, C)`` image.

    The masked pixels solve the discrete Laplace equation with the unmasked pixels as boundary values and
    reflecting image borders. The sparse system is solved by conjugate gradients up to ``inpaint_tol`` or
    ``inpaint_iters`` iterations, and the result is held within the range of the boundary values.

    Returns
    -------
    tuple[:class:`numpy.ndarray`, :class:`bool`]
        The filled image and whether the mask covered everything, in which case each channel is filled with its
        mean.
    """

    out = np.array(x, dtype=np.float64, copy=True)
    if not mask.any() or params.inpaint_iters == 0:
        return out, False
    if mask.all():
        log.warning("Saturation mask covers the whole image, filling with the mean")
        out[:] = out.reshape(-1, out.shape[2]).mean(axis=0)
        return out, True

    height, width = mask.shape
    rows, cols = np.nonzero(mask)
    n = rows.size
    index = np.full(mask.shape, -1)
    index[rows, cols] = np.arange(n)

    degree = np.zeros(n)
    off_i: list[NDArray[np.intp]] = []
    off_j: list[NDArray[np.intp]] = []
    rhs = np.zeros((n, out.shape[2]))
    known: list[NDArray[np.intp]] = []
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nr, nc = rows + dr, cols + dc
        inside = np.flatnonzero((nr >= 0) & (nr < height) & (nc >= 0) & (nc < width))
        degree[inside] += 1
        neighbor = index[nr[inside], nc[inside]]
        unknown = neighbor >= 0
        off_i.append(inside[unknown])
        off_j.append(neighbor[unknown])
        src = inside[~unknown]
        flat = nr[src] * width + nc[src]
        np.add.at(rhs, src, out.reshape(-1, out.shape[2])[flat])
        known.append(flat)

    i = np.concatenate([np.arange(n), *off_i])
    j = np.concatenate([np.arange(n), *off_j])
    data = np.concatenate([degree, -np.ones(sum(len(o) for o in off_i))])
    system = coo_matrix((data, (i, j)), shape=(n, n)).tocsr()

    boundary = out.reshape(-1, out.shape[2])[np.unique(np.concatenate(known))]
    for c in range(out.shape[2]):
        x0 = np.full(n, boundary[:, c].mean())
        solution, info = cg(system, rhs[:, c], x0=x0, rtol=params.inpaint_tol, maxiter=params.inpaint_iters)
        if info > 0:
            log.debug("Inpainting channel %d stopped after %d iterations", c, info)
        out[rows, cols, c] = np.clip(solution, boundary[:, c].min(), boundary[:, c].max())
    return out, False


def inpaint_saturated(
    s: SensorImage, params: RestoreParams, *, image: NDArray[np.float64] | None = None
) -> tuple[NDArray[np.float64], bool]:
    r"""Fills the dilated saturation mask of ``s`` by :func:`inpaint`.

    ``image`` is the normalized image to fill; it defaults to ``counts / s_sat``. A pixel is masked when any
    of its channels is saturated.
    """

    x = s.counts / s.s_sat if image is None else image
    mask = s.saturation_mask.any(axis=2)
    if params.dilate_radius > 0 and mask.any():
        mask = binary_dilation(mask, structure=_disk(params.dilate_radius))
    return inpaint(x, mask, params)


def _wiener_filter(h: NDArray[np.complex128], reg: float) -> NDArray[np.complex128]:
    filt = np.conj(h) / (np.abs(h) ** 2 + reg)
    return filt / filt[0, 0].real


def wiener_deconvolve(
    x: NDArray[np.float64], otfs: NDArray[np.complex128], params: RestoreParams
) -> NDArray[np.float64]:
    r"""Per-channel Wiener deconvolution ``F⁻¹[conj(H)·F(x) / (|H|² + reg)]``, clamped to [0, 1].

    The filter is rescaled to unit gain at zero frequency, so a constant image passes unchanged.
    """

    if otfs.shape[1:] != x.shape[:2]:
        raise GridMismatchError(x.shape[:2], otfs.shape[1:])
    out = np.empty(x.shape, dtype=np.float64)
    for c in range(x.shape[2]):
        spectrum = np.fft.fft2(x[:, :, c])
        out[:, :, c] = np.fft.ifft2(spectrum * _wiener_filter(otfs[c], params.wiener_reg[c])).real
    return np.clip(np.nan_to_num(out), 0, 1)


def check_metadata(s: SensorImage, mask: HeightMap, cfg: SimConfig) -> None:
    r"""Raises :class:`~dazzlesim.errors.MetadataMismatch` when ``s`` was not captured with ``cfg`` and ``mask``."""

    if s.config_hash != cfg.digest():
        raise MetadataMismatch("config", s.config_hash, cfg.digest())
    if s.mask_hash != mask.digest():
        raise MetadataMismatch("mask", s.mask_hash, mask.digest())


def flat_field(psf: PsfStack, s: SensorImage, cfg: SimConfig) -> NDArray[np.float64]:
    """Mean electrons per channel that a unit flat scene at unit background scale produces with the capture's
    illumination, exposure and mask, ``(N_y, N_x, 3)``."""

    grid = psf.grid
    n_y, n_x = cfg.sensor_res
    scenario = s.scenario
    ones = SpectralCube(np.ones((n_y, n_x, len(grid))), grid, validate=False)
    irradiance = scene_irradiance(
        ones, psf, scenario.illumination, cfg, exposure_time=scenario.exposure_time, scale=1.0, crop=True
    )
    p = photons(irradiance, cfg, exposure_time=scenario.exposure_time)
    mu = np.einsum("hwb,cb->hwc", p.data, sensor_weights(grid))
    return cfg.quantum_efficiency * scenario.noise.mean_scale * mu


def normalize_counts(s: SensorImage, psf: PsfStack, cfg: SimConfig) -> NDArray[np.float64]:
    r"""Maps digital counts back to scene values in [0, 1].

    Counts are converted to electrons with the gain (plus half a count for the flooring), the mean read and
    dark offsets are subtracted, and the result is divided by the recorded background scale times
    :func:`flat_field`. Multiplying by the channel response to a flat unit spectrum puts the values in the
    color space of the ground truth.
    """

    if s.counts.shape[:2] != cfg.sensor_res:
        raise GridMismatchError(cfg.sensor_res, s.counts.shape[:2])
    if s.background_scale <= 0:
        return np.zeros(s.counts.shape, dtype=np.float64)

    noise = s.scenario.noise
    counts = s.counts.astype(np.float64) + 0.5
    electrons = counts * cfg.gain if cfg.gain_mode == "e_per_dn" else counts / cfg.gain
    electrons -= (noise.mu_r if noise.read else 0.0) + (noise.mu_c if noise.dark else 0.0)

    flat = np.maximum(flat_field(psf, s, cfg), np.finfo(np.float64).tiny)
    white = sensor_weights(psf.grid).sum(axis=1)
    return np.clip(electrons / (s.background_scale * flat) * white[None, None, :], 0, 1)


def _prepare(
    s: SensorImage, psf: PsfStack, cfg: SimConfig, params: RestoreParams
) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    x = normalize_counts(s, psf, cfg)
    x, _ = inpaint_saturated(s, params, image=x)
    return x, effective_channel_otf(psf, s.scenario.illumination.curve(psf.grid))


def restore_pipeline(
    s: SensorImage,
    mask: HeightMap,
    cfg: SimConfig,
    params: RestoreParams,
    *,
    psf: PsfStack | None = None,
) -> NDArray[np.float64]:
    r"""Restores an RGB estimate in [0, 1] from a capture.

    Counts are normalized (:func:`normalize_counts`), saturated regions inpainted (:func:`inpaint_saturated`)
    and the result deconvolved with the mask's effective channel OTFs (:func:`wiener_deconvolve`).

    Raises
    ------
    MetadataMismatch
        ``s`` records a different config or mask hash.
    """

    check_metadata(s, mask, cfg)
    psf = build_psf_stack(mask, cfg) if psf is None else psf
    x, otfs = _prepare(s, psf, cfg, params)
    return wiener_deconvolve(x, otfs, params)


def _channel_loss(
    prepared: Sequence[tuple[NDArray[np.float64], NDArray[np.complex128], NDArray[np.float64]]],
    channel: int,
    reg: float,
) -> float:
    total = 0.0
    for x, otfs, gt in prepared:
        est = np.fft.ifft2(np.fft.fft2(x[:, :, channel]) * _wiener_filter(otfs[channel], reg)).real
        total += charbonnier_fft(np.clip(np.nan_to_num(est), 0, 1), gt[:, :, channel])
    return total / len(prepared)


def tune_restore_params(
    captures: Sequence[SensorImage],
    truths: Sequence[NDArray[np.float64]],
    mask: HeightMap,
    cfg: SimConfig,
    *,
    base: RestoreParams | None = None,
    refine_iters: int = 20,
    reg_grid: Sequence[float] = REG_GRID,
    psf: PsfStack | None = None,
) -> tuple[RestoreParams, float, dict[str, list[list[float]]]]:
    r"""Searches the restoration parameters that minimize the mean :func:`~dazzlesim.metrics.charbonnier_fft`.

    The inpainting iteration cap is chosen first among a quarter, one and four times the base value. The
    Wiener regularizer of each channel is then picked from a log-spaced grid and refined by a bounded scalar
    search between the grid neighbours of the best point; the refinement is kept only when it does not do
    worse. The loss separates over channels, so each channel is searched on its own.

    Returns
    -------
    tuple[:class:`RestoreParams`, :class:`float`, dict]
        The parameters, their mean validation loss, and every evaluated ``[value, loss]`` pair per parameter.
    """

    if not captures or len(captures) != len(truths):
        raise ValueError("tune_restore_params needs matching, non-empty captures and truths")

    base = RestoreParams() if base is None else base
    psf = build_psf_stack(mask, cfg) if psf is None else psf
    for s in captures:
        check_metadata(s, mask, cfg)
    search: dict[str, list[list[float]]] = {}

    def prepare(params: RestoreParams):  # noqa: ANN202
        return [(*_prepare(s, psf, cfg, params), gt) for s, gt in zip(captures, truths)]

    candidates = sorted({max(base.inpaint_iters // 4, 1), max(base.inpaint_iters, 1), 4 * max(base.inpaint_iters, 1)})
    best_iters, best_prepared, best_loss = base.inpaint_iters, None, math.inf
    search["inpaint_iters"] = []
    for iters in candidates:
        prepared = prepare(base.replace(inpaint_iters=iters))
        loss = sum(_channel_loss(prepared, c, base.wiener_reg[c]) for c in range(3))
        search["inpaint_iters"].append([float(iters), loss])
        if loss < best_loss:
            best_iters, best_prepared, best_loss = iters, prepared, loss
    assert best_prepared is not None

    grid = sorted(float(r) for r in reg_grid)
    regs: list[float] = []
    total = 0.0
    for c in range(3):
        losses = [_channel_loss(best_prepared, c, reg) for reg in grid]
        key = f"wiener_reg_{c}"
        search[key] = [[reg, loss] for reg, loss in zip(grid, losses)]
        idx = int(np.argmin(losses))
        reg, loss = grid[idx], losses[idx]

        if refine_iters > 0 and len(grid) > 1:
            low = math.log10(grid[max(idx - 1, 0)])
            high = math.log10(grid[min(idx + 1, len(grid) - 1)])
            res = minimize_scalar(
                lambda t: _channel_loss(best_prepared, c, 10.0**t),  # noqa: B023
                bounds=(low, high),
                method="bounded",
                options={"maxiter": refine_iters, "xatol": 1e-3},
            )
            refined = float(10.0 ** res.x)
            refined_loss = float(res.fun)
            search[key].append([refined, refined_loss])
            if refined_loss <= loss:
                reg, loss = refined, refined_loss

        log.debug("Channel %d: wiener_reg %.3g, loss %.4g", c, reg, loss)
        regs.append(reg)
        total += loss

    params = base.replace(wiener_reg=regs, inpaint_iters=best_iters)
    log.info("Selected %r with validation loss %.4g", params, total)
    return params, total, search
