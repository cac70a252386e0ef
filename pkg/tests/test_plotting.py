# pyright: basic

import numpy as np
import pytest
from PIL import Image

from dazzlesim.config import SimConfig
from dazzlesim.metrics import SuppressionReport
from dazzlesim.optics import HeightMap, uncoded_psf_stack
from dazzlesim.plotting import plot_height_map, plot_history, plot_psf_montage, plot_suppression


def assert_png(path):
    with Image.open(path) as im:
        assert im.format == "PNG"
        assert im.size[0] > 0


class TestPlots:
    def test_psf_montage(self, tmp_path, small_cfg: SimConfig):
        path = plot_psf_montage(uncoded_psf_stack(small_cfg), tmp_path / "sub" / "psf.png", bands=[0, 2])
        assert path == tmp_path / "sub" / "psf.png"
        assert_png(path)

    def test_height_map(self, tmp_path, small_cfg: SimConfig):
        heights = np.random.default_rng(0).uniform(0, small_cfg.doe_h_max, small_cfg.pupil_res)
        assert_png(plot_height_map(HeightMap.from_config(heights, small_cfg), tmp_path / "mask.png"))

    def test_history(self, tmp_path):
        rows = [
            {"iteration": i, "l_doe": 1 / (i + 1), "mean_lsr": 0.5, "mean_bsr": 0.9, "best_l_doe": 1 / (i + 1), "lr": 0.02}
            for i in range(5)
        ]
        assert_png(plot_history(rows, tmp_path / "history.png"))

    @pytest.mark.parametrize("lsr", [[1.0, 1.0, 1.0], [0.1, 0.01, 0.2]])
    def test_suppression(self, tmp_path, lsr):
        report = SuppressionReport([450.0, 550.0, 650.0], lsr, [0.9, 0.8, 0.95])
        assert_png(plot_suppression(report, tmp_path / "suppression.png"))
