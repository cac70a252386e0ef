from __future__ import annotations

from typing import Literal, NotRequired, TypedDict


class RawLaserSpec(TypedDict):
    lambda_l: float
    alpha_l: float
    incidence: list[float]
    fwhm: float


class RawIlluminationSpec(TypedDict):
    alpha_b: float
    illuminant: Literal["d65", "flat"]


class RawNoiseSpec(TypedDict):
    c1: float
    c2: float
    mu_c: float
    mu_r: float
    sigma_r: float
    photon: bool
    dark: bool
    read: bool
    quantization: bool
    literal_c1: bool


class RawScenario(TypedDict):
    laser: RawLaserSpec
    illumination: RawIlluminationSpec
    noise: RawNoiseSpec
    exposure_time: float
    damage_risk: NotRequired[bool]


class RawScenarioDistribution(TypedDict):
    alpha_l_max: float
    alpha_l_table_size: int
    shift_3sigma: float
    alpha_b: list[float]
    mu_r: list[float]
    sigma_r: list[float]
    c1: list[float]
    c2: list[float]
    exposure_mean: float
    exposure_std: float
    lambda_l: list[float]
    p_free: float
    literal: bool
