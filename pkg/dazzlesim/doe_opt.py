from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np

from .base_object import Base
from .camera import expose
from .config import derive_seed
from .errors import DegenerateMaskError, InvalidMaskParameters, OptimizationDiverged
from .metrics import l_doe, smooth_peak, smooth_peak_grad, suppression_report
from .optics import (
    HeightMap,
    Propagator,
    aperture_mask,
    build_psf_stack,
    pupil_coordinates,
    pupil_function,
    smooth_heights,
    uncoded_psf_stack,
)
from .restore import RestoreParams, tune_restore_params
from .spectral import identity_illuminant, lift_rgb_to_hsi, project_hsi_to_rgb

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import NDArray

    from ._types.config import RawHalfRingParams, RawStageSchedule
    from ._types.report import RawHistoryRow, RawTwoStageReport
    from .config import SimConfig
    from .metrics import SuppressionReport

log = logging.getLogger(__name__)

__all__ = (
    "DIVERGENCE_FACTOR",
    "DoeObjective",
    "GradCheckResult",
    "HalfRingParams",
    "ObjectiveResult",
    "OptimizerState",
    "StageSchedule",
    "TwoStageReport",
    "grad_check",
    "grad_check_config",
    "grad_l_doe",
    "half_ring_mask",
    "initial_mask",
    "optimize_doe",
    "run_two_stage",
)

DIVERGENCE_FACTOR = 10.0
VALIDATION_STRENGTHS = (0.0, 1e2, 1e4)


class StageSchedule(Base["RawStageSchedule"]):
    r"""Iteration budget and learning-rate schedule of the two training stages.

    The learning rate stays at ``lr_weights`` for the first ``decay_start`` share of stage 1, is halved, and is
    then multiplied by ``decay_factor`` after every further ``decay_every`` share.

    Attributes
    ----------
    stage1_iters: :class:`int`
        Adam iterations on the mask.
    stage2_iters: :class:`int`
        Function evaluations of the bounded refinement of each restoration parameter.
    lr_weights: :class:`float`
        Initial learning rate on the normalized heights ``h / h_max``.
    decay_start: :class:`float`
        Share of stage 1 before the first halving.
    decay_every: :class:`float`
        Share of stage 1 between further decays.
    decay_factor: :class:`float`
        Multiplier applied at each further decay.
    accumulate_bands: :class:`int`
        When positive, gradients are accumulated over band subsets of this size.
    blur: :class:`bool`
        Optimize through :func:`~dazzlesim.optics.smooth_heights` with ``cfg.blur_sigma_px``.
    init_fraction: :class:`float`
        Upper bound of the random initial heights, as a share of ``h_max``.
    divergence_patience: :class:`int`
        Consecutive iterations above ten times the initial loss that abort the run.
    """

    __slots__ = (
        "accumulate_bands",
        "blur",
        "decay_every",
        "decay_factor",
        "decay_start",
        "divergence_patience",
        "init_fraction",
        "lr_weights",
        "stage1_iters",
        "stage2_iters",
    )

    def __init__(
        self,
        stage1_iters: int = 1000,
        stage2_iters: int = 20,
        lr_weights: float = 2e-4,
        decay_start: float = 0.2,
        decay_every: float = 0.1,
        decay_factor: float = 0.3,
        accumulate_bands: int = 0,
        blur: bool = True,
        init_fraction: float = 0.05,
        divergence_patience: int = 50,
    ) -> None:
        if stage1_iters < 0 or stage2_iters < 0:
            raise ValueError("iteration counts must not be negative")
        if lr_weights <= 0:
            raise ValueError("lr_weights must be positive")
        if not 0 < decay_factor <= 1:
            raise ValueError("decay_factor must lie in (0, 1]")
        if decay_start < 0 or decay_every <= 0:
            raise ValueError("decay_start must not be negative and decay_every must be positive")
        if not 0 <= init_fraction <= 1:
            raise ValueError("init_fraction must lie in [0, 1]")
        if accumulate_bands < 0 or divergence_patience < 1:
            raise ValueError("accumulate_bands must not be negative and divergence_patience must be positive")

        self.stage1_iters = stage1_iters
        self.stage2_iters = stage2_iters
        self.lr_weights = lr_weights
        self.decay_start = decay_start
        self.decay_every = decay_every
        self.decay_factor = decay_factor
        self.accumulate_bands = accumulate_bands
        self.blur = blur
        self.init_fraction = init_fraction
        self.divergence_patience = divergence_patience

    @classmethod
    def desk(cls, **changes: Any) -> StageSchedule:
        """Desk-scale schedule. A larger step makes up for the shorter budget."""
        return cls(**{"stage1_iters": 1000, "lr_weights": 2e-2, **changes})

    def lr_at(self, iteration: int) -> float:
        total = max(self.stage1_iters, 1)
        start = self.decay_start * total
        if iteration < start:
            return self.lr_weights
        blocks = math.floor((iteration - start) / (self.decay_every * total))
        return self.lr_weights * 0.5 * self.decay_factor**blocks


class BandTerms(NamedTuple):
    smooth_lsr: float
    inv_bsr: float
    lsr: float
    bsr: float
    grad: NDArray[np.float64] | None


class ObjectiveResult(NamedTuple):
    r"""Value of the smooth DOE loss, its height gradient and the hard per-band ratios of the same mask."""

    value: float
    grad: NDArray[np.float64]
    lsr: NDArray[np.float64]
    bsr: NDArray[np.float64]

    @property
    def l_doe(self) -> float:
        """The report-mode loss, ``Σ lsr + Σ 1/bsr`` with hard peaks."""
        return float(self.lsr.sum() + (1 / self.bsr).sum())


class DoeObjective:
    r"""The smooth DOE loss ``Σ s(PSF)/peak₀ + Σ E₀/E`` and its exact gradient with respect to the heights.

    ``s`` is :func:`~dazzlesim.metrics.smooth_peak` and ``E`` the in-sensor energy; the clear-aperture peaks and
    energies are constants. The gradient runs backwards through the intensity, the scaled transform (its
    adjoint) and the phase ``(2π/λ)·Δn(λ)·h`` of each band, and the band contributions are summed.

    Heights are taken as raw arrays and are neither rounded nor clipped, so finite differences at any step
    size see the same function.

    Parameters
    ----------
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    workers: Optional[:class:`int`]
        Thread pool size for the per-band passes. ``1`` runs them inline.
    """

    __slots__ = ("beta", "cfg", "uncoded", "workers", "_propagators")

    def __init__(self, cfg: SimConfig, *, workers: int | None = 1) -> None:
        self.cfg = cfg
        self.beta = cfg.smooth_max_beta
        self.uncoded = uncoded_psf_stack(cfg)
        self.workers = workers
        self._propagators: dict[int, Propagator] = {}
        aperture_mask(cfg)

    def _propagator(self, band: int) -> Propagator:
        prop = self._propagators.get(band)
        if prop is None:
            prop = Propagator(self.cfg, float(self.cfg.grid.lambdas[band]))
            self._propagators[band] = prop
        return prop

    def band(self, heights: NDArray[np.float64], band: int, *, need_grad: bool = True) -> BandTerms:
        cfg = self.cfg
        lam = float(cfg.grid.lambdas[band])
        prop = self._propagator(band)
        pupil = pupil_function(heights, lam, cfg).field
        field = prop.field(pupil)
        psf = (field.real**2 + field.imag**2) * prop.eta

        energy = float(psf.sum())
        if energy <= 0:
            raise DegenerateMaskError(lam)
        peak0 = float(self.uncoded.peaks[band])
        energy0 = float(self.uncoded.energies[band])
        hard = (float(psf.max()) / peak0, energy / energy0)

        if not need_grad:
            return BandTerms(smooth_peak(psf, self.beta) / peak0, energy0 / energy, *hard, None)

        value, dpeak = smooth_peak_grad(psf, self.beta)
        grad_psf = dpeak / peak0 - energy0 / energy**2
        grad_pupil = prop.adjoint(2 * prop.eta * grad_psf * field)
        grad_phase = np.imag(grad_pupil * np.conj(pupil))
        grad = grad_phase * (2 * np.pi / lam) * float(cfg.delta_n(lam))
        return BandTerms(value / peak0, energy0 / energy, *hard, grad)

    def _map(self, heights: NDArray[np.float64], bands: Sequence[int], need_grad: bool) -> list[BandTerms]:
        if self.workers == 1 or len(bands) == 1:
            return [self.band(heights, i, need_grad=need_grad) for i in bands]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(lambda i: self.band(heights, i, need_grad=need_grad), bands))

    def value_and_grad(self, heights: NDArray[np.float64], *, accumulate: int = 0) -> ObjectiveResult:
        """Evaluates every band. With ``accumulate > 0`` bands are processed in subsets of that size and their
        gradients summed, which bounds the memory of a parallel pass without changing the result."""

        arr = np.asarray(heights, dtype=np.float64)
        n = len(self.cfg.grid)
        size = accumulate if accumulate > 0 else n
        grad = np.zeros_like(arr)
        terms: list[BandTerms] = []
        for start in range(0, n, size):
            for term in self._map(arr, range(start, min(start + size, n)), True):
                grad += term.grad  # pyright: ignore[reportOperatorIssue]
                terms.append(term)

        value = sum(t.smooth_lsr + t.inv_bsr for t in terms)
        return ObjectiveResult(
            float(value),
            grad,
            np.array([t.lsr for t in terms]),
            np.array([t.bsr for t in terms]),
        )

    def value(self, heights: NDArray[np.float64]) -> float:
        arr = np.asarray(heights, dtype=np.float64)
        terms = self._map(arr, range(len(self.cfg.grid)), False)
        return float(sum(t.smooth_lsr + t.inv_bsr for t in terms))


def grad_l_doe(h: HeightMap | NDArray[np.float64], cfg: SimConfig, *, workers: int | None = 1) -> NDArray[np.float64]:
    r"""Gradient of the smooth-mode DOE loss with respect to the heights, same shape as ``h``.

    Raises
    ------
    DegenerateMaskError
        A band has zero in-sensor energy.
    """

    heights = h.heights if isinstance(h, HeightMap) else np.asarray(h, dtype=np.float64)
    return DoeObjective(cfg, workers=workers).value_and_grad(heights).grad


def grad_check_config(**changes: Any) -> SimConfig:
    """A 16×16 pupil and sensor config, small enough for finite differences."""

    from .config import SimConfig

    return SimConfig.desk(**{"pupil_res": (16, 16), "pupil_pitch": 700e-6, "sensor_res": (16, 16), **changes})


class GradCheckResult(NamedTuple):
    seed: int
    errors: list[float]

    @property
    def max_error(self) -> float:
        return max(self.errors, default=0.0)


def grad_check(
    cfg: SimConfig,
    *,
    seed: int = 0,
    directions: int = 20,
    step: float = 1e-9,
) -> GradCheckResult:
    r"""Compares :func:`grad_l_doe` against central finite differences along random unit directions.

    Heights are drawn uniformly from ``[0, h_max]``. Each error is
    ``|fd - g·d| / max(|fd|, |g·d|)``.
    """

    rng = np.random.default_rng(seed)
    heights = rng.uniform(0, cfg.doe_h_max, size=cfg.pupil_res)
    objective = DoeObjective(cfg)
    grad = objective.value_and_grad(heights).grad

    errors: list[float] = []
    for _ in range(directions):
        d = rng.standard_normal(cfg.pupil_res)
        d /= np.linalg.norm(d)
        fd = (objective.value(heights + step * d) - objective.value(heights - step * d)) / (2 * step)
        analytic = float(np.sum(grad * d))
        scale = max(abs(fd), abs(analytic), 1e-300)
        errors.append(abs(fd - analytic) / scale)

    result = GradCheckResult(seed, errors)
    log.info("Gradient check seed %d: max relative error %.3e", seed, result.max_error)
    return result


class OptimizerState:
    r"""Adam state over the normalized heights ``θ = h / h_max`` together with the best mask seen so far.

    Attributes
    ----------
    theta: :class:`numpy.ndarray`
        Current parameters in ``[0, 1]``.
    iteration: :class:`int`
        Steps taken.
    m: :class:`numpy.ndarray`
        First moment.
    v: :class:`numpy.ndarray`
        Second moment.
    lr: :class:`float`
        The learning rate of the last step.
    best_l_doe: :class:`float`
        The lowest report-mode loss recorded.
    best_mask: :class:`~dazzlesim.optics.HeightMap`
        The mask that achieved it.
    """

    __slots__ = ("best_l_doe", "best_mask", "beta1", "beta2", "eps", "iteration", "lr", "m", "theta", "v")

    def __init__(
        self,
        theta: NDArray[np.float64],
        best_mask: HeightMap,
        best_l_doe: float,
        *,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ) -> None:
        self.theta = np.clip(theta, 0, 1)
        self.iteration = 0
        self.m = np.zeros_like(theta)
        self.v = np.zeros_like(theta)
        self.lr = 0.0
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.best_l_doe = best_l_doe
        self.best_mask = best_mask

    def record(self, l_doe: float, mask: Callable[[], HeightMap]) -> None:
        if l_doe < self.best_l_doe:
            self.best_l_doe = l_doe
            self.best_mask = mask()

    def step(self, grad: NDArray[np.float64], lr: float) -> None:
        """One Adam update followed by projection onto ``[0, 1]``."""

        self.iteration += 1
        self.lr = lr
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.iteration)
        v_hat = self.v / (1 - self.beta2**self.iteration)
        self.theta = np.clip(self.theta - lr * m_hat / (np.sqrt(v_hat) + self.eps), 0, 1)


def initial_mask(cfg: SimConfig, sched: StageSchedule, seed: int) -> HeightMap:
    """Uniform random heights in ``[0, init_fraction·h_max]``."""

    rng = np.random.default_rng(seed)
    heights = rng.uniform(0, sched.init_fraction * cfg.doe_h_max, size=cfg.pupil_res)
    return HeightMap.from_config(heights, cfg)


def optimize_doe(
    init: HeightMap,
    sched: StageSchedule,
    cfg: SimConfig,
    *,
    workers: int | None = 1,
    callback: Callable[[RawHistoryRow], None] | None = None,
) -> tuple[HeightMap, list[RawHistoryRow]]:
    r"""Minimizes the smooth DOE loss with projected Adam.

    The heights are parameterized as ``h = h_max·smooth(θ)`` with ``θ ∈ [0, 1]`` (plain ``h_max·θ`` when the
    schedule disables blur), so every iterate lies in ``[0, h_max]``. The mask with the lowest report-mode
    loss is returned, which may be ``init`` itself.

    Parameters
    ----------
    init: :class:`~dazzlesim.optics.HeightMap`
        Starting mask.
    sched: :class:`StageSchedule`
        Budget and learning-rate schedule.
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    workers: Optional[:class:`int`]
        Thread pool size of the per-band passes.
    callback: Optional[Callable[[dict], None]]
        Called with every history row.

    Raises
    ------
    OptimizationDiverged
        The loss stayed above ten times its initial value for ``divergence_patience`` iterations.
    DegenerateMaskError
        An iterate lost all in-sensor energy in some band.
    """

    if sched.stage1_iters == 0:
        return init, []

    h_max = cfg.doe_h_max
    sigma = cfg.blur_sigma_px if sched.blur else 0.0
    objective = DoeObjective(cfg, workers=workers)

    initial = objective.value_and_grad(init.heights, accumulate=sched.accumulate_bands).l_doe
    state = OptimizerState(init.heights / h_max, init, initial)
    history: list[RawHistoryRow] = []
    above = 0
    log.info("Optimizing mask for %d iterations, initial l_doe %.4g", sched.stage1_iters, initial)

    for it in range(sched.stage1_iters):
        heights = np.clip(h_max * smooth_heights(state.theta, sigma), 0, h_max)
        result = objective.value_and_grad(heights, accumulate=sched.accumulate_bands)
        state.record(result.l_doe, lambda: HeightMap.from_config(heights, cfg))  # noqa: B023

        lr = sched.lr_at(it)
        row: RawHistoryRow = {
            "iteration": it,
            "l_doe": result.l_doe,
            "mean_lsr": float(result.lsr.mean()),
            "mean_bsr": float(result.bsr.mean()),
            "best_l_doe": state.best_l_doe,
            "lr": lr,
        }
        history.append(row)
        if callback is not None:
            callback(row)
        if it % 50 == 0:
            log.debug(
                "iter %d: l_doe %.4g mean lsr %.4g mean bsr %.4g lr %.3g",
                it, row["l_doe"], row["mean_lsr"], row["mean_bsr"], lr,
            )

        above = above + 1 if result.l_doe > DIVERGENCE_FACTOR * initial else 0
        if above >= sched.divergence_patience:
            log.warning("Optimization diverged at iteration %d", it)
            raise OptimizationDiverged(history)  # pyright: ignore[reportArgumentType]

        state.step(h_max * smooth_heights(result.grad, sigma), lr)

    log.info("Best l_doe %.4g (initial %.4g)", state.best_l_doe, initial)
    return state.best_mask, history


class HalfRingParams(Base["RawHalfRingParams"]):
    r"""Geometry of the half-ring baseline mask.

    Attributes
    ----------
    r1: :class:`float`
        Inner radius in meters.
    r2: :class:`float`
        Outer radius in meters.
    h_step: Optional[:class:`float`]
        Height inside the ring. ``None`` gives a π phase step at 550 nm.
    """

    __slots__ = ("h_step", "r1", "r2")

    def __init__(self, r1: float, r2: float, h_step: float | None = None) -> None:
        self.r1 = r1
        self.r2 = r2
        self.h_step = h_step

    @classmethod
    def default(cls, cfg: SimConfig) -> HalfRingParams:
        radius = cfg.aperture_diameter / 2
        return cls(0.3 * radius, 0.7 * radius)

    def to_dict(self) -> RawHalfRingParams:
        data: RawHalfRingParams = {"r1": self.r1, "r2": self.r2}
        if self.h_step is not None:
            data["h_step"] = self.h_step
        return data


def half_ring_mask(cfg: SimConfig, params: HalfRingParams | None = None) -> HeightMap:
    r"""The half-ring baseline: ``h_step`` on ``{r1 <= r < r2, v > 0}`` and zero elsewhere.

    Raises
    ------
    InvalidMaskParameters
        The radii violate ``0 < r1 <= r2 <= R`` or the step exceeds ``h_max``.
    """

    params = HalfRingParams.default(cfg) if params is None else params
    radius = cfg.aperture_diameter / 2
    if not 0 < params.r1 <= params.r2 <= radius * (1 + 1e-12):
        raise InvalidMaskParameters(
            f"half-ring radii must satisfy 0 < r1 <= r2 <= {radius:.4g} m, got r1={params.r1:.4g}, r2={params.r2:.4g}"
        )

    h_step = params.h_step
    if h_step is None:
        h_step = 550e-9 / (2 * float(cfg.delta_n(550e-9)))
    if not 0 <= h_step <= cfg.doe_h_max:
        raise InvalidMaskParameters(f"h_step {h_step:.4g} m is outside [0, {cfg.doe_h_max:.4g}] m")

    v, u = pupil_coordinates(cfg)
    r = np.hypot(v[:, None], u[None, :])
    ring = (r >= params.r1) & (r < params.r2) & (v[:, None] > 0)
    return HeightMap.from_config(np.where(ring, h_step, 0.0), cfg)


class TwoStageReport(Base["RawTwoStageReport"]):
    r"""Outcome of :func:`run_two_stage`.

    Attributes
    ----------
    mask_hash: :class:`str`
        Digest of the frozen stage-1 mask.
    config_hash: :class:`str`
        Digest of the config.
    suppression: :class:`~dazzlesim.metrics.SuppressionReport`
        Per-band ratios of the mask.
    iterations: :class:`int`
        Stage-1 iterations run.
    initial_l_doe: :class:`float`
        Report-mode loss of the first iterate.
    best_l_doe: :class:`float`
        Report-mode loss of the returned mask.
    restore: :class:`~dazzlesim.restore.RestoreParams`
        The selected restoration parameters.
    val_charbonnier: :class:`float`
        Mean validation loss with them.
    search: dict[:class:`str`, list[list[:class:`float`]]]
        The evaluated ``[value, loss]`` pairs per searched parameter.
    """

    __slots__ = (
        "best_l_doe",
        "config_hash",
        "initial_l_doe",
        "iterations",
        "mask_hash",
        "restore",
        "search",
        "suppression",
        "val_charbonnier",
    )

    def __init__(
        self,
        *,
        mask_hash: str,
        config_hash: str,
        suppression: SuppressionReport,
        iterations: int,
        initial_l_doe: float,
        best_l_doe: float,
        restore: RestoreParams,
        val_charbonnier: float,
        search: dict[str, list[list[float]]],
    ) -> None:
        self.mask_hash = mask_hash
        self.config_hash = config_hash
        self.suppression = suppression
        self.iterations = iterations
        self.initial_l_doe = initial_l_doe
        self.best_l_doe = best_l_doe
        self.restore = restore
        self.val_charbonnier = val_charbonnier
        self.search = search

    def to_dict(self) -> RawTwoStageReport:
        return {
            "mask_hash": self.mask_hash,
            "config_hash": self.config_hash,
            "stage1": {
                "iterations": self.iterations,
                "initial_l_doe": self.initial_l_doe,
                "best_l_doe": self.best_l_doe,
                "suppression": self.suppression.to_dict(),
            },
            "restore": self.restore.to_dict(),
            "val_charbonnier": self.val_charbonnier,
            "search": self.search,
        }


def run_two_stage(
    cfg: SimConfig,
    sched: StageSchedule,
    val_scenes: Sequence[NDArray[np.float64]],
    *,
    init: HeightMap | None = None,
    restore_params: RestoreParams | None = None,
    workers: int | None = 1,
) -> tuple[HeightMap, RestoreParams, TwoStageReport]:
    r"""Stage 1 optimizes the mask; stage 2 freezes it and tunes the restoration on validation captures.

    Each validation scene (an ``(N_y, N_x, 3)`` RGB image in [0, 1]) is lifted, exposed at the evaluation
    grid's fixed parameters for a few laser strengths, and the restoration parameters are searched to minimize
    the mean :func:`~dazzlesim.metrics.charbonnier_fft` against the lifted scene's projection.

    Raises
    ------
    ValueError
        ``val_scenes`` is empty.
    """

    from .datagen import grid_scenario

    if not val_scenes:
        raise ValueError("run_two_stage needs at least one validation scene")

    if init is None:
        init = initial_mask(cfg, sched, derive_seed(cfg.rng_seed, 0))
    mask, history = optimize_doe(init, sched, cfg, workers=workers)
    frozen = mask.digest()

    psf = build_psf_stack(mask, cfg, workers=workers)
    uncoded = uncoded_psf_stack(cfg)
    suppression = suppression_report(psf, uncoded)
    initial_l_doe = history[0]["l_doe"] if history else l_doe(psf, uncoded)
    log.info("Stage 1 done: mean lsr %.4g, mean bsr %.4g", suppression.mean_lsr, suppression.mean_bsr)

    captures = []
    truths = []
    flat = identity_illuminant(cfg.grid)
    for k, scene in enumerate(val_scenes):
        cube = lift_rgb_to_hsi(scene, cfg.grid)
        gt = np.clip(project_hsi_to_rgb(cube, flat), 0, 1)
        for j, alpha_l in enumerate(VALIDATION_STRENGTHS):
            seed = derive_seed(cfg.rng_seed, 1_000_000 + k * len(VALIDATION_STRENGTHS) + j)
            captures.append(expose(cube, mask, grid_scenario(alpha_l, cfg), seed, cfg, psf=psf))
            truths.append(gt)

    params, loss, search = tune_restore_params(
        captures, truths, mask, cfg, base=restore_params, refine_iters=sched.stage2_iters, psf=psf
    )
    if mask.digest() != frozen:
        raise RuntimeError("stage 2 modified the frozen mask")

    report = TwoStageReport(
        mask_hash=frozen,
        config_hash=cfg.digest(),
        suppression=suppression,
        iterations=len(history),
        initial_l_doe=initial_l_doe,
        best_l_doe=l_doe(psf, uncoded),
        restore=params,
        val_charbonnier=loss,
        search=search,
    )
    log.info("Stage 2 done: validation charbonnier %.4g", loss)
    return mask, params, report
