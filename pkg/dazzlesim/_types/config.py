from __future__ import annotations

from typing import Literal, NotRequired, TypedDict


class RawSimConfig(TypedDict):
    lambda_min: float
    lambda_max: float
    n_bands: int
    focal_length: float
    exposure_time: float
    aperture_diameter: float
    quantum_efficiency: float
    gain: float
    full_well: float
    read_noise_mean: float
    read_noise_std: float
    dark_current: float
    bpc: int
    pupil_pitch: float
    sensor_pitch: float
    pupil_res: list[int]
    sensor_res: list[int]
    dispersion_a: float
    dispersion_b: float
    doe_h_max: float
    rng_seed: int
    gain_mode: Literal["e_per_dn", "dn_per_e"]
    smooth_max_beta: float
    blur_sigma_px: float
    flare_fraction: float


class RawStageSchedule(TypedDict):
    stage1_iters: int
    stage2_iters: int
    lr_weights: float
    decay_start: float
    decay_every: float
    decay_factor: float
    accumulate_bands: int
    blur: bool
    init_fraction: float
    divergence_patience: int


class RawRestoreParams(TypedDict):
    wiener_reg: list[float]
    inpaint_iters: int
    inpaint_tol: float
    dilate_radius: int


class RawHalfRingParams(TypedDict):
    r1: float
    r2: float
    h_step: NotRequired[float]
