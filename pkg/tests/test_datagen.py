# pyright: basic

import json
import logging

import numpy as np
import pytest
from scipy.stats import kstest

from dazzlesim import datagen
from dazzlesim.config import SimConfig, derive_seed
from dazzlesim.datagen import (
    MANIFEST_NAME,
    TEST_STRENGTHS,
    DatasetManifest,
    ScenarioDistribution,
    alpha_l_table,
    center_crop,
    grid_scenario,
    iter_dataset,
    list_scenes,
    regenerate_item,
    sample_scenario,
    synth_dataset,
    verify_manifest,
)
from dazzlesim.errors import MetadataMismatch
from dazzlesim.io import load_rgb_png, load_sensor_image, save_rgb_png16
from dazzlesim.optics import HeightMap


@pytest.fixture(scope="module")
def mask(small_cfg: SimConfig) -> HeightMap:
    heights = np.random.default_rng(9).uniform(0, small_cfg.doe_h_max, small_cfg.pupil_res)
    return HeightMap.from_config(heights, small_cfg)


class TestDistribution:
    def test_defaults(self):
        dist = ScenarioDistribution()
        assert dist.alpha_b == (0.3, 0.7)
        assert dist.p_free == pytest.approx(1 / 7)
        assert ScenarioDistribution.from_dict(dist.to_dict()) == dist

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha_b": (0.7, 0.3)},
            {"p_free": 1.5},
            {"alpha_l_table_size": 0},
            {"exposure_mean": 0},
            {"shift_3sigma": -1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ScenarioDistribution(**kwargs)

    def test_alpha_table(self):
        table = alpha_l_table(1000, 2e6)
        assert table.shape == (1000,)
        assert table.min() >= 0
        assert table.max() <= 2e6
        assert alpha_l_table(1000, 2e6) is table


class TestSampling:
    def test_deterministic(self, small_cfg: SimConfig):
        dist = ScenarioDistribution()
        assert sample_scenario(dist, 5, small_cfg) == sample_scenario(dist, 5, small_cfg)
        assert sample_scenario(dist, 5, small_cfg) != sample_scenario(dist, 6, small_cfg)

    def test_marginals(self, small_cfg: SimConfig):
        dist = ScenarioDistribution(alpha_l_table_size=1000)
        scenarios = [sample_scenario(dist, seed, small_cfg) for seed in range(3000)]

        alpha_b = np.array([s.illumination.alpha_b for s in scenarios])
        assert alpha_b.min() >= 0.3
        assert alpha_b.max() <= 0.7
        assert alpha_b.mean() == pytest.approx(0.5, abs=0.01)

        free = np.mean([s.laser.alpha_l == 0 for s in scenarios])
        assert free == pytest.approx(1 / 7, abs=0.03)

        lambdas = np.array([s.laser.lambda_l for s in scenarios])
        assert lambdas.min() >= small_cfg.grid.lambda_min
        assert lambdas.max() <= small_cfg.grid.lambda_max

        n_y, n_x = small_cfg.sensor_res
        shifts = np.array([s.laser.shift_px(small_cfg) for s in scenarios])
        assert np.all(np.abs(shifts[:, 0]) < n_y)
        assert np.all(np.abs(shifts[:, 1]) < n_x)
        assert shifts[:, 1].std() == pytest.approx(0.12 * n_x, rel=0.1)

        noise = [s.noise for s in scenarios]
        assert all(350 <= n.mu_r <= 400 for n in noise)
        assert all(0.9 <= n.c2 <= 1.1 for n in noise)
        assert not any(n.literal_c1 for n in noise)

    @pytest.mark.slow
    def test_marginals_ks(self, small_cfg: SimConfig):
        dist = ScenarioDistribution(alpha_l_table_size=1000)
        scenarios = [sample_scenario(dist, derive_seed(small_cfg.rng_seed, i), small_cfg) for i in range(100_000)]
        grid = small_cfg.grid
        n_y, n_x = small_cfg.sensor_res
        shifts = np.array([s.laser.shift_px(small_cfg) for s in scenarios])

        def uniform(low, high):
            return ("uniform", (low, high - low))

        cases = {
            "alpha_b": ([s.illumination.alpha_b for s in scenarios], uniform(*dist.alpha_b)),
            "lambda_l": ([s.laser.lambda_l for s in scenarios], uniform(grid.lambda_min, grid.lambda_max)),
            "shift_y": (shifts[:, 0], ("norm", (0.0, dist.shift_3sigma / 3 * n_y))),
            "shift_x": (shifts[:, 1], ("norm", (0.0, dist.shift_3sigma / 3 * n_x))),
            "mu_r": ([s.noise.mu_r for s in scenarios], uniform(*dist.mu_r)),
            "c2": ([s.noise.c2 for s in scenarios], uniform(*dist.c2)),
        }
        for name, (values, (cdf, args)) in cases.items():
            result = kstest(np.asarray(values), cdf, args=args)
            assert result.pvalue > 0.01, f"{name}: {result}"

    def test_p_free_keeps_other_draws(self, small_cfg: SimConfig):
        lasers = sample_scenario(ScenarioDistribution(p_free=0.0), 11, small_cfg)
        free = sample_scenario(ScenarioDistribution.laser_free(), 11, small_cfg)
        assert free.laser.alpha_l == 0
        assert lasers.laser.alpha_l > 0
        assert free.illumination == lasers.illumination
        assert free.noise == lasers.noise
        assert free.laser.lambda_l == lasers.laser.lambda_l

    def test_literal_mode(self, small_cfg: SimConfig):
        scenario = sample_scenario(ScenarioDistribution(literal=True), 3, small_cfg)
        assert scenario.noise.literal_c1
        assert scenario.noise.mean_scale == scenario.noise.c1

    def test_disjoint_wavelengths(self, small_cfg: SimConfig):
        with pytest.raises(ValueError, match="overlap"):
            sample_scenario(ScenarioDistribution(lambda_l=(700e-9, 750e-9)), 0, small_cfg)

    def test_grid_scenario(self, small_cfg: SimConfig, desk_cfg: SimConfig):
        scenario = grid_scenario(1e3, small_cfg)
        assert scenario.laser.lambda_l == 550e-9
        assert scenario.laser.incidence == (0.0, 0.0)
        assert scenario.illumination.alpha_b == 0.7
        assert scenario.noise.mu_r == 390
        shifted = desk_cfg.replace(lambda_min=560e-9, lambda_max=660e-9)
        assert grid_scenario(0, shifted).laser.lambda_l == shifted.grid.lambdas[2]


class TestScenes:
    def test_list_scenes(self, scene_dir):
        (scene_dir / "notes.txt").write_text("skip me")
        assert [p.name for p in list_scenes(scene_dir)] == ["scene_0.png", "scene_1.png", "scene_2.png"]

    def test_no_scenes(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            list_scenes(tmp_path)

    def test_center_crop_upscales(self, small_cfg: SimConfig, scene_dir):
        small = load_rgb_png(scene_dir / "scene_2.png")
        assert small.shape[:2] == (20, 24)
        assert center_crop(small, small_cfg).shape == (*small_cfg.sensor_res, 3)


class TestSynth:
    def test_write_and_load(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = synth_dataset(scene_dir, mask, ScenarioDistribution(), 6, tmp_path / "ds", small_cfg, base_seed=3)
        assert len(manifest) == 6
        assert manifest.path == tmp_path / "ds" / MANIFEST_NAME

        header = json.loads(manifest.path.read_text().splitlines()[0])
        assert header["kind"] == "header"
        assert header["mask_hash"] == mask.digest()
        assert header["config_hash"] == small_cfg.digest()

        loaded = DatasetManifest.load(tmp_path / "ds")
        assert [e.index for e in loaded] == list(range(6))
        for entry in loaded:
            sensor = load_sensor_image(loaded.root / entry.sensor_path)
            assert sensor.counts.shape == (*small_cfg.sensor_res, 3)
            assert sensor.scenario == entry.scenario
            gt = load_rgb_png(loaded.root / entry.gt_path)
            assert gt.shape == (*small_cfg.sensor_res, 3)
            assert entry.stratum is None

    def test_deterministic_across_workers(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        dist = ScenarioDistribution()
        one = synth_dataset(scene_dir, mask, dist, 4, tmp_path / "a", small_cfg, base_seed=1, workers=1)
        many = synth_dataset(scene_dir, mask, dist, 4, tmp_path / "b", small_cfg, base_seed=1, workers=3)
        for a, b in zip(one, many):
            assert a.seed == b.seed
            assert a.crop == b.crop
            assert (tmp_path / "a" / a.sensor_path).read_bytes() == (tmp_path / "b" / b.sensor_path).read_bytes()

    def test_matches_iterator(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        dist = ScenarioDistribution()
        manifest = synth_dataset(scene_dir, mask, dist, 3, tmp_path / "ds", small_cfg, base_seed=2)
        streamed = list(iter_dataset(scene_dir, mask, dist, small_cfg, n_items=3, base_seed=2))
        for entry, (item, sensor, _) in zip(manifest, streamed):
            assert item.seed == entry.seed
            stored = load_sensor_image(manifest.root / entry.sensor_path)
            assert np.array_equal(stored.counts, sensor.counts)

    def test_downsample(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = synth_dataset(
            scene_dir, mask, ScenarioDistribution(), 2, tmp_path / "ds", small_cfg, downsample=16
        )
        assert manifest.header["downsample"] == 16
        sensor = load_sensor_image(manifest.root / manifest[0].sensor_path)
        assert sensor.counts.shape == (16, 16, 3)
        assert verify_manifest(manifest, mask, small_cfg, fraction=1.0) == []

    def test_empty(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = synth_dataset(scene_dir, mask, ScenarioDistribution(), 0, tmp_path / "ds", small_cfg)
        assert len(manifest) == 0
        assert len(DatasetManifest.load(manifest.path)) == 0
        assert verify_manifest(manifest, mask, small_cfg) == []

    def test_unreadable_scene_skipped(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir, caplog):
        (scene_dir / "scene_1.png").write_bytes(b"broken")
        with caplog.at_level(logging.WARNING, logger="dazzlesim.datagen"):
            manifest = synth_dataset(scene_dir, mask, ScenarioDistribution(), 6, tmp_path / "ds", small_cfg)
        assert len(manifest) == 6
        assert all(not e.scene.endswith("scene_1.png") for e in manifest)
        assert "unreadable scene" in caplog.text


class TestRegenerate:
    def test_bit_exact(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = synth_dataset(scene_dir, mask, ScenarioDistribution(), 5, tmp_path / "ds", small_cfg)
        for entry in manifest:
            sensor, gt = regenerate_item(manifest, entry.index, mask, small_cfg)
            stored = load_sensor_image(manifest.root / entry.sensor_path)
            assert np.array_equal(sensor.counts, stored.counts)
            assert sensor.seed == stored.seed
            np.testing.assert_allclose(load_rgb_png(manifest.root / entry.gt_path), gt, atol=0.5 / 65535 + 1e-12)
        assert verify_manifest(manifest, mask, small_cfg, fraction=1.0) == []

    def test_tampering_detected(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = synth_dataset(scene_dir, mask, ScenarioDistribution(), 3, tmp_path / "ds", small_cfg)
        target = manifest.root / manifest[1].gt_path
        save_rgb_png16(np.zeros((*small_cfg.sensor_res, 3)), target)
        assert verify_manifest(manifest, mask, small_cfg, fraction=1.0) == [1]

    def test_wrong_mask(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = synth_dataset(scene_dir, mask, ScenarioDistribution(), 1, tmp_path / "ds", small_cfg)
        with pytest.raises(MetadataMismatch, match="mask"):
            regenerate_item(manifest, 0, HeightMap.flat(small_cfg), small_cfg)
        with pytest.raises(MetadataMismatch, match="config"):
            verify_manifest(manifest, mask, small_cfg.replace(rng_seed=5))

    def test_sparse_indices_rejected(self):
        entry = datagen.ManifestEntry({"index": 1})
        with pytest.raises(ValueError, match="dense"):
            DatasetManifest({"kind": "header"}, [entry], ".")  # pyright: ignore[reportArgumentType]


class TestGrid:
    def test_layout(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = datagen.test_grid(scene_dir, mask, small_cfg, tmp_path / "grid")
        assert len(manifest) == 3 * len(TEST_STRENGTHS)
        assert manifest.strata() == sorted(TEST_STRENGTHS)
        for k, entry in enumerate(manifest):
            assert entry.stratum == TEST_STRENGTHS[k % len(TEST_STRENGTHS)]
            assert entry.scenario.laser.alpha_l == entry.stratum
            assert entry.scenario.illumination.alpha_b == 0.7

    def test_center_crops(self, tmp_path, small_cfg: SimConfig, mask: HeightMap, scene_dir):
        manifest = datagen.test_grid(scene_dir, mask, small_cfg, tmp_path / "grid", strengths=(0.0,))
        assert manifest[0].crop == [8, 4, 32, 32]
        assert verify_manifest(manifest, mask, small_cfg, fraction=1.0) == []


@pytest.mark.slow
def test_large_dataset_regenerates(tmp_path, scene_dir):
    cfg = SimConfig.desk(n_bands=5)
    mask = HeightMap.from_config(np.random.default_rng(0).uniform(0, cfg.doe_h_max, cfg.pupil_res), cfg)
    manifest = synth_dataset(scene_dir, mask, ScenarioDistribution(), 500, tmp_path / "ds", cfg, workers=None)
    assert verify_manifest(DatasetManifest.load(tmp_path / "ds"), mask, cfg, fraction=0.01, seed=4) == []
