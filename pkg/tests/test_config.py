# pyright: basic

import json

import numpy as np
import pytest

from dazzlesim.config import (
    SEED_ENV_VAR,
    SimConfig,
    WavelengthGrid,
    config_from_dict,
    derive_seed,
    dump_config,
    load_config,
)
from dazzlesim.errors import ConfigError, WavelengthOutOfRange


class TestSimConfig:
    def test_defaults(self):
        cfg = SimConfig()
        assert cfg.n_bands == 31
        assert cfg.focal_length == pytest.approx(0.11)
        assert cfg.full_well == 25500
        assert cfg.pupil_res == (2160, 2160)
        assert cfg.sensor_res == (2048, 2048)
        assert cfg.s_sat == 65535
        assert cfg.gain_mode == "e_per_dn"

    def test_desk_preset(self, desk_cfg: SimConfig):
        assert desk_cfg.pupil_res == (128, 128)
        assert desk_cfg.sensor_res == (128, 128)
        assert list(desk_cfg.grid.nm) == pytest.approx([450, 500, 550, 600, 650])

    def test_full_scale_covers_aperture(self):
        cfg = SimConfig.full_scale()
        assert cfg.pupil_res[0] * cfg.pupil_pitch == pytest.approx(cfg.aperture_diameter)

    def test_immutable(self, desk_cfg: SimConfig):
        with pytest.raises(AttributeError, match="immutable"):
            desk_cfg.gain = 1.0  # pyright: ignore[reportAttributeAccessIssue]

    def test_replace_validates(self, desk_cfg: SimConfig):
        assert desk_cfg.replace(gain=0.5).gain == 0.5
        with pytest.raises(ConfigError, match="exposure_time"):
            desk_cfg.replace(exposure_time=-1.0)

    @pytest.mark.parametrize(
        ("changes", "match"),
        [
            ({"bogus": 1}, "unknown field"),
            ({"n_bands": 1}, "at least two bands"),
            ({"lambda_min": 800e-9}, "smaller than lambda_max"),
            ({"quantum_efficiency": 1.5}, r"\(0, 1\]"),
            ({"bpc": 20}, r"\[8, 16\]"),
            ({"gain_mode": "other"}, "gain_mode"),
            ({"rng_seed": -1}, "64-bit"),
            ({"sensor_res": (0, 4)}, "strictly positive"),
            ({"focal_length": float("nan")}, "finite"),
            ({"smooth_max_beta": 1.0}, "exceed 1"),
        ],
    )
    def test_invalid(self, changes: dict, match: str):
        with pytest.raises(ConfigError, match=match):
            SimConfig(**changes)

    def test_roundtrip_and_digest(self, desk_cfg: SimConfig):
        again = SimConfig.from_dict(json.loads(json.dumps(desk_cfg.to_dict())))
        assert again == desk_cfg
        assert hash(again) == hash(desk_cfg)
        assert again.digest() == desk_cfg.digest()
        assert desk_cfg.replace(rng_seed=1).digest() != desk_cfg.digest()

    def test_delta_n(self):
        cfg = SimConfig(dispersion_a=0.4, dispersion_b=1e-15)
        assert float(cfg.delta_n(500e-9)) == pytest.approx(0.4 + 1e-15 / 500e-9**2)


class TestConfigLoading:
    def test_aliases(self):
        cfg = config_from_dict({"lambda_min_nm": 420, "pupil_pitch_um": 5, "aperture_diameter_mm": 10})
        assert cfg.lambda_min == 420e-9
        assert cfg.pupil_pitch == pytest.approx(5e-6)
        assert cfg.aperture_diameter == pytest.approx(10e-3)

    def test_alias_conflict(self):
        with pytest.raises(ConfigError, match="given together"):
            config_from_dict({"lambda_min": 420e-9, "lambda_min_nm": 420})

    def test_base(self, desk_cfg: SimConfig):
        cfg = config_from_dict({"gain": 0.5}, base=desk_cfg)
        assert cfg.pupil_res == (128, 128)
        assert cfg.gain == 0.5

    @pytest.mark.parametrize(("raw", "expected"), [("17", 17), ("0x10", 16)])
    def test_env_seed(self, monkeypatch: pytest.MonkeyPatch, raw: str, expected: int):
        monkeypatch.setenv(SEED_ENV_VAR, raw)
        assert config_from_dict({}).rng_seed == expected
        assert config_from_dict({}, use_env=False).rng_seed == 0

    def test_env_seed_invalid(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv(SEED_ENV_VAR, "seven")
        with pytest.raises(ConfigError, match=SEED_ENV_VAR):
            config_from_dict({})

    def test_file_roundtrip(self, tmp_path, desk_cfg: SimConfig):
        path = tmp_path / "cfg.json"
        dump_config(desk_cfg, path)
        assert load_config(path) == desk_cfg

    def test_bad_files(self, tmp_path):
        with pytest.raises(ConfigError, match="unable to read"):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(bad)
        bad.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(bad)


class TestWavelengthGrid:
    def test_sampling(self):
        grid = WavelengthGrid(400e-9, 700e-9, 31)
        assert len(grid) == 31
        assert grid.delta_lambda == pytest.approx(10e-9)
        assert np.all(np.diff(grid.lambdas) > 0)
        assert grid.index_of(550e-9) == 15

    def test_lookup_errors(self):
        grid = WavelengthGrid(400e-9, 700e-9, 31)
        with pytest.raises(WavelengthOutOfRange, match="outside"):
            grid.index_of(555e-9)
        with pytest.raises(WavelengthOutOfRange):
            grid.nearest_index(720e-9)
        assert grid.nearest_index(556e-9) == 16

    def test_equality(self):
        assert WavelengthGrid(400e-9, 700e-9, 31) == WavelengthGrid(400e-9, 700e-9, 31)
        assert WavelengthGrid(400e-9, 700e-9, 31) != WavelengthGrid(400e-9, 700e-9, 16)


def test_derive_seed():
    assert derive_seed(7, 3) == derive_seed(7, 3)
    seeds = {derive_seed(7, k) for k in range(100)}
    assert len(seeds) == 100
    assert derive_seed(7, 0) != derive_seed(8, 0)
    assert all(0 <= s < 2**64 for s in seeds)
