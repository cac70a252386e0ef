# pyright: basic

import csv
import json
import logging

import pytest

from dazzlesim import caching
from dazzlesim.__main__ import main
from dazzlesim.config import SimConfig, dump_config
from dazzlesim.datagen import TEST_STRENGTHS
from dazzlesim.io import load_height_map, load_sensor_image, save_height_map
from dazzlesim.optics import HeightMap


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers = list(root.handlers)
    level = root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers = handlers
    root.setLevel(level)


@pytest.fixture
def run(tmp_path, small_cfg: SimConfig):
    cfg_path = tmp_path / "cfg.json"
    dump_config(small_cfg, cfg_path)

    def inner(*argv: str, out: str = "out", config: bool = True) -> int:
        args = [*argv, "--out", str(tmp_path / out), "--log-file", str(tmp_path / "dazzlesim.log")]
        if config:
            args += ["--desk", "--config", str(cfg_path)]
        return main(args)

    return inner


def read_csv(path):
    with path.open(newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "dazzlesim v" in capsys.readouterr().out


def test_no_subcommand_prints_help(capsys):
    assert main([]) == 0
    assert "subcommands" in capsys.readouterr().out


class TestConfigHandling:
    def test_config_required(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["psf", "--out", str(tmp_path), "--log-file", str(tmp_path / "log")])
        assert exc.value.code == 2

    def test_missing_config(self, tmp_path, capsys):
        with pytest.raises(SystemExit):
            main(["psf", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path), "--log-file", str(tmp_path / "log")])
        assert "unable to read" in capsys.readouterr().err

    def test_seed_override(self, run, tmp_path):
        assert run("psf", "--seed", "9") == 0
        manifest = json.loads((tmp_path / "out" / "run_psf.json").read_text())
        assert manifest["seed"] == 9
        assert manifest["config"]["rng_seed"] == 9

    def test_mask_shape_checked(self, run, tmp_path, desk_cfg: SimConfig):
        save_height_map(HeightMap.flat(desk_cfg), tmp_path / "desk.raw")
        with pytest.raises(SystemExit):
            run("psf", "--mask", str(tmp_path / "desk.raw"))


class TestPsf:
    def test_outputs(self, run, tmp_path, small_cfg: SimConfig):
        assert run("psf") == 0
        out = tmp_path / "out"
        for name in ("psf.raw", "psf.json", "psf_montage.png", "mask.png", "suppression.json"):
            assert (out / name).is_file()

        manifest = json.loads((out / "run_psf.json").read_text())
        assert manifest["command"] == "psf"
        assert SimConfig.from_dict(manifest["config"]) == small_cfg
        assert manifest["extra"]["mean_lsr"] == pytest.approx(1.0)
        assert manifest["extra"]["mask_hash"] == HeightMap.flat(small_cfg).digest()

    def test_caches_released(self, run):
        assert run("psf") == 0
        assert sum(caching.cache_info("psf").values()) == 0
        assert sum(caching.cache_info("aperture").values()) == 0

    def test_half_ring(self, run, tmp_path):
        assert run("psf", "--half-ring") == 0
        suppression = json.loads((tmp_path / "out" / "suppression.json").read_text())
        assert suppression["mean_lsr"] < 1


class TestSimulate:
    def test_capture(self, run, tmp_path, scene_dir, small_cfg: SimConfig):
        assert run("simulate", str(scene_dir / "scene_0.png"), "--alpha-l", "100") == 0
        out = tmp_path / "out"
        sensor = load_sensor_image(out / "sensor.png")
        assert sensor.counts.shape == (*small_cfg.sensor_res, 3)
        assert sensor.scenario.laser.lambda_l == 550e-9
        assert sensor.saturated_pixels > 0
        assert (out / "gt.png").is_file()
        assert json.loads((out / "run_simulate.json").read_text())["extra"]["damage_risk"] is False

    def test_damage_risk_flagged(self, run, tmp_path, scene_dir):
        assert run("simulate", str(scene_dir / "scene_0.png"), "--alpha-l", "2e6", "--no-noise") == 0
        assert json.loads((tmp_path / "out" / "run_simulate.json").read_text())["extra"]["damage_risk"] is True

    def test_wavelength_outside_grid(self, run, scene_dir, capsys):
        with pytest.raises(SystemExit) as exc:
            run("simulate", str(scene_dir / "scene_0.png"), "--alpha-l", "1", "--lambda-l", "800")
        assert exc.value.code == 1
        assert "simulate: error" in capsys.readouterr().err

    def test_unreadable_scene(self, run, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"nope")
        with pytest.raises(SystemExit):
            run("simulate", str(tmp_path / "bad.png"))


class TestOptimize:
    def test_short_run(self, run, tmp_path, small_cfg: SimConfig):
        assert run("optimize", "--iters", "2") == 0
        out = tmp_path / "out"
        mask = load_height_map(out / "mask.raw")
        assert mask.shape == small_cfg.pupil_res
        rows = read_csv(out / "history.csv")
        assert rows[0] == ["iteration", "l_doe", "mean_lsr", "mean_bsr", "best_l_doe", "lr"]
        assert len(rows) == 3
        report = json.loads((out / "report.json").read_text())
        assert report["mask_hash"] == mask.digest()
        assert report["schedule"]["stage1_iters"] == 2

    def test_init_from_file(self, run, tmp_path, small_cfg: SimConfig):
        save_height_map(HeightMap.flat(small_cfg), tmp_path / "init.raw")
        assert run("optimize", "--iters", "0", "--init", "file", "--mask", str(tmp_path / "init.raw")) == 0
        assert load_height_map(tmp_path / "out" / "mask.raw") == HeightMap.flat(small_cfg)


class TestGradCheck:
    def test_passes(self, run, tmp_path):
        assert run("grad-check", "--seeds", "0", "--directions", "4", config=False) == 0
        data = json.loads((tmp_path / "out" / "grad_check.json").read_text())
        assert data["max_error"] <= 1e-4
        assert len(data["seeds"]["0"]) == 4

    def test_zero_tolerance_fails(self, run):
        assert run("grad-check", "--seeds", "0", "--directions", "2", "--tolerance", "0", config=False) == 1


class TestLsrTable:
    def test_baselines(self, run, tmp_path, small_cfg: SimConfig):
        assert run("lsr-table") == 0
        rows = read_csv(tmp_path / "out" / "lsr_table.csv")
        assert len(rows[0]) == 1 + 2 * small_cfg.n_bands
        assert rows[0][:2] == ["mask", "lsr_450.0"]
        assert [row[0] for row in rows[1:]] == ["flat", "half-ring"]
        assert [float(x) for x in rows[1][1:]] == pytest.approx([1.0] * (2 * small_cfg.n_bands))
        assert (tmp_path / "out" / "suppression_half-ring.png").is_file()

    def test_named_masks(self, run, tmp_path, small_cfg: SimConfig):
        save_height_map(HeightMap.flat(small_cfg), tmp_path / "flat.raw")
        assert run("lsr-table", "--no-baselines", f"mine={tmp_path / 'flat.raw'}", str(tmp_path / "flat.raw")) == 0
        rows = read_csv(tmp_path / "out" / "lsr_table.csv")
        assert [row[0] for row in rows[1:]] == ["mine", "flat"]

    def test_needs_a_mask(self, run):
        with pytest.raises(SystemExit):
            run("lsr-table", "--no-baselines")


class TestDatasets:
    def test_synth_verified(self, run, tmp_path, scene_dir):
        assert run("synth", str(scene_dir), "-n", "3", "--verify", "1.0", out="ds") == 0
        manifest = json.loads((tmp_path / "ds" / "run_synth.json").read_text())
        assert manifest["extra"]["items"] == 3
        assert manifest["extra"]["verify_mismatches"] == []
        assert manifest["outputs"] == [str(tmp_path / "ds" / "manifest.jsonl")]

    def test_synth_without_scenes(self, run, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(SystemExit):
            run("synth", str(tmp_path / "empty"), "-n", "1", out="ds")

    def test_grid_then_eval(self, run, tmp_path, scene_dir):
        assert run("test-grid", str(scene_dir), out="grid") == 0
        assert run("eval", str(tmp_path / "grid")) == 0

        report = json.loads((tmp_path / "out" / "eval.json").read_text())
        assert report["overall"]["items"] == 3 * len(TEST_STRENGTHS)
        assert set(report["strata"]) == {repr(s) for s in TEST_STRENGTHS}
        assert all(group["items"] == 3 for group in report["strata"].values())
        assert 0 <= report["overall"]["l1"] <= 1

        rows = read_csv(tmp_path / "out" / "eval.csv")
        assert rows[0] == ["stratum", "items", "l1", "psnr", "charbonnier_fft", "raw_l1"]
        assert len(rows) == 1 + len(TEST_STRENGTHS)

    def test_eval_empty_manifest(self, run, tmp_path, scene_dir):
        assert run("synth", str(scene_dir), "-n", "0", out="ds") == 0
        assert run("eval", str(tmp_path / "ds" / "manifest.jsonl")) == 0
        report = json.loads((tmp_path / "out" / "eval.json").read_text())
        assert report["overall"] == {}
        assert report["strata"] == {}
        assert len(read_csv(tmp_path / "out" / "eval.csv")) == 1

    def test_eval_missing_files(self, run, tmp_path, scene_dir, capsys):
        assert run("synth", str(scene_dir), "-n", "2", out="ds") == 0
        (tmp_path / "ds" / "items" / "000001_sensor.png").unlink()
        with pytest.raises(SystemExit):
            run("eval", str(tmp_path / "ds"))
        assert "000001_sensor.png" in capsys.readouterr().err
