from __future__ import annotations

from typing import TypedDict

from .config import RawRestoreParams


class RawSuppressionReport(TypedDict):
    wavelengths_nm: list[float]
    lsr: list[float]
    bsr: list[float]
    mean_lsr: float
    max_lsr: float
    mean_bsr: float
    max_bsr: float


class RawQualityReport(TypedDict):
    l1: float
    psnr: float | None
    charbonnier_fft: float


class RawHistoryRow(TypedDict):
    iteration: int
    l_doe: float
    mean_lsr: float
    mean_bsr: float
    best_l_doe: float
    lr: float


class RawStageOneSummary(TypedDict):
    iterations: int
    best_l_doe: float
    initial_l_doe: float
    suppression: RawSuppressionReport


class RawTwoStageReport(TypedDict):
    mask_hash: str
    config_hash: str
    stage1: RawStageOneSummary
    restore: RawRestoreParams
    val_charbonnier: float
    search: dict[str, list[list[float]]]
