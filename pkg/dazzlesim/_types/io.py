from __future__ import annotations

from typing import Literal, NotRequired, TypedDict

from .config import RawSimConfig
from .json import Jsonable
from .scenario import RawScenario


class RawCubeSidecar(TypedDict):
    width: int
    height: int
    bands: int
    wavelengths_nm: list[float]
    layout: Literal["row-major-band-fastest"]
    dtype: NotRequired[Literal["<f4"]]


class RawHeightMapSidecar(TypedDict):
    N_u: int
    N_v: int
    pitch_m: float
    h_max_m: float
    dtype: NotRequired[Literal["<f4"]]


class RawSensorSidecar(TypedDict):
    width: int
    height: int
    bpc: int
    seed: int
    config_hash: str
    mask_hash: str
    scenario: RawScenario
    saturated_pixels: int
    background_scale: float


class RawManifestHeader(TypedDict):
    kind: Literal["header"]
    base_seed: int
    mask_hash: str
    config_hash: str
    config: RawSimConfig
    downsample: NotRequired[int | None]


class RawManifestEntry(TypedDict):
    index: int
    seed: int
    scene: str
    crop: list[int]
    scenario: RawScenario
    sensor_path: str
    gt_path: str
    config_hash: str
    stratum: NotRequired[float | None]


class RawRunManifest(TypedDict):
    schema_version: int
    command: str
    argv: list[str]
    config: RawSimConfig
    seed: int
    git_describe: str
    outputs: list[str]
    extra: NotRequired[dict[str, Jsonable]]
