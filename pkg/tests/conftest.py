# pyright: basic

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from dazzlesim.config import SEED_ENV_VAR, SimConfig
from dazzlesim.io import save_rgb_png16


@pytest.fixture(autouse=True)
def no_env_seed(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


@pytest.fixture(scope="session")
def desk_cfg() -> SimConfig:
    return SimConfig.desk()


@pytest.fixture(scope="session")
def small_cfg() -> SimConfig:
    """32² pupil and sensor over three bands, for tests that run the whole chain many times."""
    return SimConfig.desk(pupil_res=(32, 32), pupil_pitch=400e-6, sensor_res=(32, 32), n_bands=3)


def smooth_rgb(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    noise = rng.random((height, width, 3))
    img = gaussian_filter(noise, sigma=(3, 3, 0), mode="wrap")
    lo, hi = img.min(), img.max()
    return 0.1 + 0.8 * (img - lo) / (hi - lo)


@pytest.fixture
def scene_dir(tmp_path_factory: pytest.TempPathFactory):
    path = tmp_path_factory.mktemp("scenes")
    rng = np.random.default_rng(1234)
    for i, (h, w) in enumerate([(48, 40), (40, 40), (20, 24)]):
        save_rgb_png16(smooth_rgb(rng, h, w), path / f"scene_{i}.png")
    return path


@pytest.fixture(scope="session")
def make_rgb():
    return smooth_rgb
