from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure

if TYPE_CHECKING:
    from collections.abc import Sequence

    from ._types.report import RawHistoryRow
    from .metrics import SuppressionReport
    from .optics import HeightMap, PsfStack

log = logging.getLogger(__name__)

__all__ = ("plot_height_map", "plot_history", "plot_psf_montage", "plot_suppression")

STYLE = {
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "image.cmap": "magma",
}
LOG_FLOOR = 1e-12


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    log.debug("Wrote figure %s", path)
    return path


def plot_psf_montage(psf: PsfStack, path: str | Path, *, bands: Sequence[int] | None = None) -> Path:
    """Log-scaled PSFs of the selected bands (every fifth by default) in a grid, sharing one color scale."""

    if bands is None:
        bands = range(0, len(psf), 5)
    bands = list(bands)
    cols = min(len(bands), 4)
    rows = math.ceil(len(bands) / cols)
    data = np.log10(np.maximum(psf.psfs[bands], LOG_FLOOR))
    vmax = float(data.max())

    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(3 * cols, 3 * rows))
        axes = fig.subplots(rows, cols, squeeze=False)
        image = None
        for ax, band, frame in zip(axes.flat, bands, data, strict=False):
            image = ax.imshow(frame, vmin=vmax - 8, vmax=vmax)
            ax.set_title(f"{psf.grid.nm[band]:.0f} nm")
            ax.set_xticks([])
            ax.set_yticks([])
        for ax in list(axes.flat)[len(bands) :]:
            ax.set_axis_off()
        if image is not None:
            fig.colorbar(image, ax=axes, shrink=0.8, label="log10 PSF")
        return _save(fig, path)


def plot_height_map(h: HeightMap, path: str | Path) -> Path:
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(5, 4))
        ax = fig.add_subplot()
        image = ax.imshow(h.heights * 1e6, cmap="viridis", vmin=0, vmax=h.h_max * 1e6)
        ax.set_title(f"mask {h.digest()[:12]}")
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(image, ax=ax, label="height (µm)")
        return _save(fig, path)


def plot_history(history: Sequence[RawHistoryRow], path: str | Path) -> Path:
    """Loss curve of a mask optimization, with the learning rate on a second axis."""

    it = [row["iteration"] for row in history]
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(6, 4))
        ax = fig.add_subplot()
        ax.plot(it, [row["l_doe"] for row in history], label="l_doe")
        ax.plot(it, [row["best_l_doe"] for row in history], label="best", linestyle="--")
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        ax.legend(loc="upper right")
        lr_ax = ax.twinx()
        lr_ax.plot(it, [row["lr"] for row in history], color="gray", linewidth=0.8)
        lr_ax.set_yscale("log")
        lr_ax.set_ylabel("learning rate")
        return _save(fig, path)


def plot_suppression(report: SuppressionReport, path: str | Path) -> Path:
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(6, 4))
        ax = fig.add_subplot()
        ax.plot(report.wavelengths_nm, report.lsr, marker="o", label="LSR")
        ax.plot(report.wavelengths_nm, report.bsr, marker="s", label="BSR")
        ax.set_xlabel("wavelength (nm)")
        ax.set_ylabel("ratio to uncoded")
        ax.set_yscale("log")
        ax.legend()
        return _save(fig, path)
