from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np

from .base_object import Base, Record, add_prop
from .caching import cached_callable
from .camera import IlluminationSpec, LaserSpec, NoiseSpec, Scenario, SensorImage, expose
from .config import derive_seed
from .errors import MetadataMismatch
from .imageops import resize_bicubic
from .io import (
    SCENE_SUFFIXES,
    load_rgb_png,
    load_sensor_image,
    read_jsonl,
    save_rgb_png16,
    save_sensor_image,
    write_jsonl,
)
from .optics import build_psf_stack
from .spectral import identity_illuminant, lift_rgb_to_hsi, project_hsi_to_rgb

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    from numpy.typing import NDArray

    from ._types.io import RawManifestHeader
    from ._types.scenario import RawScenarioDistribution
    from .config import SimConfig
    from .optics import HeightMap, PsfStack

log = logging.getLogger(__name__)

__all__ = (
    "DatasetManifest",
    "ManifestEntry",
    "ScenarioDistribution",
    "TEST_STRENGTHS",
    "alpha_l_table",
    "center_crop",
    "grid_scenario",
    "iter_dataset",
    "list_scenes",
    "regenerate_item",
    "sample_scenario",
    "synth_dataset",
    "test_grid",
    "verify_manifest",
)

TEST_STRENGTHS = (0.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6)
GRID_LASER_WAVELENGTH = 550e-9
ALPHA_TABLE_SEED = 0
MANIFEST_NAME = "manifest.jsonl"

Range = tuple[float, float]


def _range(name: str, value: Sequence[float]) -> Range:
    low, high = (float(v) for v in value)
    if not low <= high:
        raise ValueError(f"{name} range must satisfy low <= high, got {value!r}")
    return low, high


class ScenarioDistribution(Base["RawScenarioDistribution"]):
    r"""The distribution capture scenarios are drawn from.

    Ranges are ``(low, high)`` pairs sampled uniformly.

    Attributes
    ----------
    alpha_l_max: :class:`float`
        Upper end of the laser strengths.
    alpha_l_table_size: :class:`int`
        Size of the precomputed strength table that draws pick from.
    shift_3sigma: :class:`float`
        Three standard deviations of the per-axis laser shift, as a share of the sensor extent. In literal mode
        it scales ``f / sensor extent`` instead and is applied to the incidence direction.
    alpha_b: tuple[:class:`float`, :class:`float`]
    mu_r: tuple[:class:`float`, :class:`float`]
        Read noise mean in electrons.
    sigma_r: tuple[:class:`float`, :class:`float`]
        Read noise standard deviation in electrons.
    c1: tuple[:class:`float`, :class:`float`]
    c2: tuple[:class:`float`, :class:`float`]
    exposure_mean: :class:`float`
        In seconds.
    exposure_std: :class:`float`
        In seconds.
    lambda_l: tuple[:class:`float`, :class:`float`]
        Laser wavelengths in meters, intersected with the config's grid when sampling.
    p_free: :class:`float`
        Probability of a laser-free item.
    literal: :class:`bool`
        Literal replication mode: direction-based shifts and ``c1`` as the photon-mean scale.
    """

    __slots__ = (
        "alpha_b",
        "alpha_l_max",
        "alpha_l_table_size",
        "c1",
        "c2",
        "exposure_mean",
        "exposure_std",
        "lambda_l",
        "literal",
        "mu_r",
        "p_free",
        "shift_3sigma",
        "sigma_r",
    )

    def __init__(
        self,
        alpha_l_max: float = 2e6,
        alpha_l_table_size: int = 100_000,
        shift_3sigma: float = 0.36,
        alpha_b: Sequence[float] = (0.3, 0.7),
        mu_r: Sequence[float] = (350.0, 400.0),
        sigma_r: Sequence[float] = (10.0, 11.0),
        c1: Sequence[float] = (0.0, 0.25),
        c2: Sequence[float] = (0.9, 1.1),
        exposure_mean: float = 0.1,
        exposure_std: float = 0.01,
        lambda_l: Sequence[float] = (400e-9, 700e-9),
        p_free: float = 1 / 7,
        literal: bool = False,
    ) -> None:
        if alpha_l_max < 0 or alpha_l_table_size < 1:
            raise ValueError("alpha_l_max must not be negative and the table needs at least one entry")
        if shift_3sigma < 0 or exposure_mean <= 0 or exposure_std < 0:
            raise ValueError("shift and exposure parameters are out of range")
        if not 0 <= p_free <= 1:
            raise ValueError("p_free must lie in [0, 1]")

        self.alpha_l_max = float(alpha_l_max)
        self.alpha_l_table_size = int(alpha_l_table_size)
        self.shift_3sigma = float(shift_3sigma)
        self.alpha_b = _range("alpha_b", alpha_b)
        self.mu_r = _range("mu_r", mu_r)
        self.sigma_r = _range("sigma_r", sigma_r)
        self.c1 = _range("c1", c1)
        self.c2 = _range("c2", c2)
        self.exposure_mean = float(exposure_mean)
        self.exposure_std = float(exposure_std)
        self.lambda_l = _range("lambda_l", lambda_l)
        self.p_free = float(p_free)
        self.literal = bool(literal)

    @classmethod
    def laser_free(cls, **changes: Any) -> ScenarioDistribution:
        return cls(**{"p_free": 1.0, **changes})


@cached_callable("datagen")
def alpha_l_table(size: int, alpha_l_max: float) -> NDArray[np.float64]:
    """The fixed table of laser strengths, uniform over ``[0, alpha_l_max]``."""

    table = np.random.default_rng(ALPHA_TABLE_SEED).uniform(0, alpha_l_max, size=size)
    table.flags.writeable = False
    return table


def sample_scenario(dist: ScenarioDistribution, seed: int, cfg: SimConfig) -> Scenario:
    r"""Draws one scenario. Equal seeds give equal scenarios.

    Every marginal is drawn in a fixed order whether or not the item is laser-free, so changing ``p_free``
    does not reshuffle the other parameters.
    """

    rng = np.random.default_rng(seed)
    grid = cfg.grid
    n_y, n_x = cfg.sensor_res

    free = rng.random() < dist.p_free
    table = alpha_l_table(dist.alpha_l_table_size, dist.alpha_l_max)
    pick = int(rng.integers(len(table)))
    alpha_l = 0.0 if free else float(table[pick])

    low = max(dist.lambda_l[0], grid.lambda_min)
    high = min(dist.lambda_l[1], grid.lambda_max)
    if low > high:
        raise ValueError("laser wavelength range does not overlap the wavelength grid")
    lambda_l = float(rng.uniform(low, high))

    pixel_to_n = cfg.sensor_pitch / cfg.focal_length
    if dist.literal:
        sigma = dist.shift_3sigma / 3 * np.array([cfg.focal_length / (n_y * cfg.sensor_pitch), cfg.focal_length / (n_x * cfg.sensor_pitch)])
        shift = rng.normal(0, sigma) / pixel_to_n
    else:
        shift = rng.normal(0, dist.shift_3sigma / 3 * np.array([n_y, n_x], dtype=np.float64))
    limit = np.array([n_y, n_x]) * (1 - 1e-9)
    shift = np.clip(shift, -limit, limit)
    incidence = (float(shift[1] * pixel_to_n), float(shift[0] * pixel_to_n))

    alpha_b = float(rng.uniform(*dist.alpha_b))
    mu_r = float(rng.uniform(*dist.mu_r))
    sigma_r = float(rng.uniform(*dist.sigma_r))
    c1 = float(rng.uniform(*dist.c1))
    c2 = float(rng.uniform(*dist.c2))
    mu_c = max(float(rng.normal(cfg.dark_current, cfg.dark_current / 2)), 0.0)
    exposure = max(float(rng.normal(dist.exposure_mean, dist.exposure_std)), 1e-3 * dist.exposure_mean)

    return Scenario(
        LaserSpec(lambda_l, alpha_l, incidence),
        IlluminationSpec(alpha_b),
        NoiseSpec(c1, c2, mu_c, mu_r, sigma_r, literal_c1=dist.literal),
        exposure,
    )


def grid_scenario(alpha_l: float, cfg: SimConfig) -> Scenario:
    """The evaluation grid's fixed capture: on-axis laser at 550 nm (or the nearest band), ``α_b = 0.7``."""

    grid = cfg.grid
    lambda_l = GRID_LASER_WAVELENGTH
    if not grid.lambda_min <= lambda_l <= grid.lambda_max:
        lambda_l = float(grid.lambdas[len(grid) // 2])
    return Scenario(
        LaserSpec(lambda_l, alpha_l),
        IlluminationSpec(0.7),
        NoiseSpec(c1=0.2, c2=1.0, mu_c=0.002, mu_r=390.0, sigma_r=10.5),
        cfg.exposure_time,
    )


class ManifestEntry(Record):
    r"""One synthesized pair, as recorded in the manifest.

    Paths are relative to the manifest's directory, except ``scene`` which is kept as given.
    """

    index: int = add_prop("index", cls=int)
    seed: int = add_prop("seed", cls=int)
    scene: str = add_prop("scene")
    crop: list[int] = add_prop("crop", cls=int, is_list=True)
    scenario: Scenario = add_prop("scenario", cls=Scenario.from_dict)
    sensor_path: str = add_prop("sensor_path")
    gt_path: str = add_prop("gt_path")
    config_hash: str = add_prop("config_hash")
    stratum: float | None = add_prop("stratum", default=None)


class DatasetManifest:
    r"""The header and entries of a synthesized dataset.

    .. container:: operations

        .. describe:: len(x)

            Returns the number of items.

        .. describe:: iter(x)

            Iterates over the :class:`ManifestEntry` objects in index order.

    Attributes
    ----------
    header: dict
        ``base_seed``, ``mask_hash``, ``config_hash``, the full config and the downsampling size.
    entries: list[:class:`ManifestEntry`]
    root: :class:`pathlib.Path`
        The directory relative paths resolve against.
    """

    __slots__ = ("entries", "header", "root")

    def __init__(self, header: RawManifestHeader, entries: list[ManifestEntry], root: str | Path) -> None:
        indices = [e.index for e in entries]
        if indices != list(range(len(entries))):
            raise ValueError("manifest indices must be unique and dense")
        self.header = header
        self.entries = entries
        self.root = Path(root)

    @property
    def path(self) -> Path:
        return self.root / MANIFEST_NAME

    def write(self) -> Path:
        rows: list[Any] = [self.header, *(e.to_dict() for e in self.entries)]
        write_jsonl(rows, self.path)
        log.info("Wrote manifest with %d items to %s", len(self), self.path)
        return self.path

    @classmethod
    def load(cls, path: str | Path) -> DatasetManifest:
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        rows = list(read_jsonl(path))
        if not rows or rows[0].get("kind") != "header":
            raise ValueError(f"{path} does not start with a manifest header")
        return cls(rows[0], [ManifestEntry(row) for row in rows[1:]], path.parent)  # pyright: ignore[reportArgumentType]

    def strata(self) -> list[float]:
        return sorted({e.stratum for e in self.entries if e.stratum is not None})

    def check(self, mask: HeightMap, cfg: SimConfig) -> None:
        if self.header["config_hash"] != cfg.digest():
            raise MetadataMismatch("config", self.header["config_hash"], cfg.digest())
        if self.header["mask_hash"] != mask.digest():
            raise MetadataMismatch("mask", self.header["mask_hash"], mask.digest())

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def __getitem__(self, index: int) -> ManifestEntry:
        return self.entries[index]

    def __repr__(self) -> str:
        return f"<DatasetManifest items={len(self)} root={self.root}>"


def list_scenes(scene_dir: str | Path) -> list[Path]:
    """Image files in ``scene_dir`` in sorted order.

    Raises
    ------
    FileNotFoundError
        The directory holds no PNG or JPEG file.
    """

    scenes = sorted(p for p in Path(scene_dir).iterdir() if p.suffix.lower() in SCENE_SUFFIXES)
    if not scenes:
        raise FileNotFoundError(f"no scenes found in {scene_dir}")
    return scenes


def _cover(rgb: NDArray[np.float64], cfg: SimConfig) -> NDArray[np.float64]:
    # upscales scenes smaller than the sensor so a full crop fits
    n_y, n_x = cfg.sensor_res
    height, width = rgb.shape[:2]
    if height >= n_y and width >= n_x:
        return rgb
    scale = max(n_y / height, n_x / width)
    size = (max(math.ceil(height * scale), n_y), max(math.ceil(width * scale), n_x))
    return np.clip(resize_bicubic(rgb, size), 0, 1)


def _crop(
    rgb: NDArray[np.float64], cfg: SimConfig, rng: np.random.Generator | None
) -> tuple[NDArray[np.float64], list[int]]:
    rgb = _cover(rgb, cfg)
    n_y, n_x = cfg.sensor_res
    height, width = rgb.shape[:2]
    if rng is None:
        top, left = (height - n_y) // 2, (width - n_x) // 2
    else:
        top = int(rng.integers(0, height - n_y + 1))
        left = int(rng.integers(0, width - n_x + 1))
    return rgb[top : top + n_y, left : left + n_x], [top, left, n_y, n_x]


def center_crop(rgb: NDArray[np.float64], cfg: SimConfig) -> NDArray[np.float64]:
    """The sensor-sized center of ``rgb``, upscaled first when the image is smaller than the sensor."""
    return _crop(rgb, cfg, None)[0]


def _apply_crop(rgb: NDArray[np.float64], crop: Sequence[int], cfg: SimConfig) -> NDArray[np.float64]:
    top, left, rows, cols = crop
    return _cover(rgb, cfg)[top : top + rows, left : left + cols]


class _Rendered(NamedTuple):
    sensor: SensorImage
    gt: NDArray[np.float64]


def _downsample(rendered: _Rendered, size: int) -> _Rendered:
    s = rendered.sensor
    counts = np.clip(np.round(resize_bicubic(s.counts.astype(np.float64), (size, size))), 0, s.s_sat)
    sensor = SensorImage(
        counts.astype(np.int64),
        bpc=s.bpc,
        scenario=s.scenario,
        seed=s.seed,
        config_hash=s.config_hash,
        mask_hash=s.mask_hash,
        background_scale=s.background_scale,
    )
    return _Rendered(sensor, np.clip(resize_bicubic(rendered.gt, (size, size)), 0, 1))


def _render(
    rgb: NDArray[np.float64],
    mask: HeightMap,
    scenario: Scenario,
    seed: int,
    cfg: SimConfig,
    psf: PsfStack,
    downsample: int | None,
) -> _Rendered:
    cube = lift_rgb_to_hsi(rgb, cfg.grid)
    gt = np.clip(project_hsi_to_rgb(cube, identity_illuminant(cfg.grid)), 0, 1)
    sensor = expose(cube, mask, scenario, derive_seed(seed, 2), cfg, psf=psf)
    rendered = _Rendered(sensor, gt)
    if downsample:
        rendered = _downsample(rendered, downsample)
    return rendered


class _Item(NamedTuple):
    entry: dict[str, Any]
    rendered: _Rendered


def _random_item(
    k: int,
    scenes: Sequence[Path],
    order: NDArray[np.intp],
    mask: HeightMap,
    dist: ScenarioDistribution,
    base_seed: int,
    cfg: SimConfig,
    psf: PsfStack,
    downsample: int | None,
) -> _Item:
    seed = derive_seed(base_seed, k)
    for attempt in range(len(scenes)):
        scene = scenes[order[(k + attempt) % len(scenes)]]
        try:
            rgb = load_rgb_png(scene)
        except OSError:
            log.warning("Skipping unreadable scene %s", scene)
            continue
        break
    else:
        raise FileNotFoundError("none of the scenes could be read")

    cropped, crop = _crop(rgb, cfg, np.random.default_rng(derive_seed(seed, 0)))
    scenario = sample_scenario(dist, derive_seed(seed, 1), cfg)
    entry = {
        "index": k,
        "seed": seed,
        "scene": str(scene),
        "crop": crop,
        "scenario": scenario.to_dict(),
        "config_hash": cfg.digest(),
        "stratum": None,
    }
    return _Item(entry, _render(cropped, mask, scenario, seed, cfg, psf, downsample))


def _header(base_seed: int, mask: HeightMap, cfg: SimConfig, downsample: int | None) -> RawManifestHeader:
    return {
        "kind": "header",
        "base_seed": base_seed,
        "mask_hash": mask.digest(),
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "downsample": downsample,
    }


def iter_dataset(
    scene_dir: str | Path,
    mask: HeightMap,
    dist: ScenarioDistribution,
    cfg: SimConfig,
    *,
    n_items: int | None = None,
    base_seed: int | None = None,
    downsample: int | None = None,
    psf: PsfStack | None = None,
) -> Iterator[tuple[ManifestEntry, SensorImage, NDArray[np.float64]]]:
    r"""Yields ``(entry, sensor image, ground truth)`` items without touching the disk.

    The items are identical to what :func:`synth_dataset` writes for the same arguments. ``n_items=None``
    yields forever.
    """

    scenes = list_scenes(scene_dir)
    base_seed = cfg.rng_seed if base_seed is None else base_seed
    psf = build_psf_stack(mask, cfg) if psf is None else psf
    order = np.random.default_rng(base_seed).permutation(len(scenes))
    k = 0
    while n_items is None or k < n_items:
        item = _random_item(k, scenes, order, mask, dist, base_seed, cfg, psf, downsample)
        yield ManifestEntry(item.entry), item.rendered.sensor, item.rendered.gt
        k += 1


def _write_items(
    out_dir: Path,
    header: RawManifestHeader,
    count: int,
    make: Any,
    workers: int | None,
) -> DatasetManifest:
    items_dir = out_dir / "items"

    def one(k: int) -> dict[str, Any]:
        item: _Item = make(k)
        sensor_path = items_dir / f"{k:06d}_sensor.png"
        gt_path = items_dir / f"{k:06d}_gt.png"
        save_sensor_image(item.rendered.sensor, sensor_path)
        save_rgb_png16(item.rendered.gt, gt_path)
        entry = dict(item.entry)
        entry["sensor_path"] = str(sensor_path.relative_to(out_dir))
        entry["gt_path"] = str(gt_path.relative_to(out_dir))
        if item.entry["scenario"].get("damage_risk"):
            log.warning("Item %d is flagged with a sensor damage risk", k)
        return entry

    if workers == 1:
        rows = [one(k) for k in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(count)))

    manifest = DatasetManifest(header, [ManifestEntry(row) for row in rows], out_dir)
    manifest.write()
    return manifest


def synth_dataset(
    scene_dir: str | Path,
    mask: HeightMap,
    dist: ScenarioDistribution,
    n_items: int,
    out_dir: str | Path,
    cfg: SimConfig,
    *,
    base_seed: int | None = None,
    downsample: int | None = None,
    workers: int | None = 1,
) -> DatasetManifest:
    r"""Synthesizes ``n_items`` pairs from the scenes in ``scene_dir`` and writes them with a manifest.

    Scenes are visited round-robin in a seeded shuffle and randomly cropped to the sensor resolution; each
    crop is lifted to a cube, exposed with a sampled scenario and, when ``downsample`` is set, both images are
    resized to ``downsample × downsample`` with antialiased bicubic resampling. Unreadable scenes are skipped
    in favour of the next one in the order, so the indices stay dense.

    Parameters
    ----------
    scene_dir: :class:`str` | :class:`pathlib.Path`
        PNG or JPEG scenes.
    mask: :class:`~dazzlesim.optics.HeightMap`
        The mask to capture through.
    dist: :class:`ScenarioDistribution`
        Where the scenarios come from.
    n_items: :class:`int`
        Number of pairs.
    out_dir: :class:`str` | :class:`pathlib.Path`
        Receives ``manifest.jsonl`` and ``items/``.
    cfg: :class:`~dazzlesim.config.SimConfig`
        The run's configuration.
    base_seed: Optional[:class:`int`]
        Defaults to ``cfg.rng_seed``.
    downsample: Optional[:class:`int`]
        Output size of the resized pairs.
    workers: Optional[:class:`int`]
        Thread pool size. Items are independent and each has its own seed.
    """

    scenes = list_scenes(scene_dir)
    out_dir = Path(out_dir)
    base_seed = cfg.rng_seed if base_seed is None else base_seed
    header = _header(base_seed, mask, cfg, downsample)
    if n_items == 0:
        manifest = DatasetManifest(header, [], out_dir)
        manifest.write()
        return manifest

    psf = build_psf_stack(mask, cfg, workers=workers)
    order = np.random.default_rng(base_seed).permutation(len(scenes))
    log.info("Synthesizing %d items from %d scenes", n_items, len(scenes))
    return _write_items(
        out_dir,
        header,
        n_items,
        lambda k: _random_item(k, scenes, order, mask, dist, base_seed, cfg, psf, downsample),
        workers,
    )


def test_grid(
    scene_dir: str | Path,
    mask: HeightMap,
    cfg: SimConfig,
    out_dir: str | Path,
    *,
    strengths: Sequence[float] = TEST_STRENGTHS,
    base_seed: int | None = None,
    workers: int | None = 1,
) -> DatasetManifest:
    r"""The fixed evaluation grid: every readable scene, center-cropped, at every laser strength.

    Other parameters are those of :func:`grid_scenario`. Each entry's ``stratum`` is its laser strength.
    """

    out_dir = Path(out_dir)
    base_seed = cfg.rng_seed if base_seed is None else base_seed
    loaded: list[tuple[Path, NDArray[np.float64], list[int]]] = []
    for scene in list_scenes(scene_dir):
        try:
            rgb = load_rgb_png(scene)
        except OSError:
            log.warning("Skipping unreadable scene %s", scene)
            continue
        cropped, crop = _crop(rgb, cfg, None)
        loaded.append((scene, cropped, crop))

    psf = build_psf_stack(mask, cfg, workers=workers)
    per_scene = len(strengths)

    def make(k: int) -> _Item:
        scene, cropped, crop = loaded[k // per_scene]
        alpha_l = float(strengths[k % per_scene])
        seed = derive_seed(base_seed, k)
        scenario = grid_scenario(alpha_l, cfg)
        entry = {
            "index": k,
            "seed": seed,
            "scene": str(scene),
            "crop": crop,
            "scenario": scenario.to_dict(),
            "config_hash": cfg.digest(),
            "stratum": alpha_l,
        }
        return _Item(entry, _render(cropped, mask, scenario, seed, cfg, psf, None))

    log.info("Building the evaluation grid: %d scenes x %d strengths", len(loaded), per_scene)
    return _write_items(out_dir, _header(base_seed, mask, cfg, None), len(loaded) * per_scene, make, workers)


test_grid.__test__ = False  # pyright: ignore[reportFunctionMemberAccess]


def regenerate_item(
    manifest: DatasetManifest,
    index: int,
    mask: HeightMap,
    cfg: SimConfig,
    *,
    psf: PsfStack | None = None,
) -> tuple[SensorImage, NDArray[np.float64]]:
    r"""Recomputes item ``index`` from its manifest row.

    Raises
    ------
    MetadataMismatch
        The manifest was written for another config or mask.
    """

    manifest.check(mask, cfg)
    entry = manifest[index]
    rgb = _apply_crop(load_rgb_png(entry.scene), entry.crop, cfg)
    psf = build_psf_stack(mask, cfg) if psf is None else psf
    rendered = _render(rgb, mask, entry.scenario, entry.seed, cfg, psf, manifest.header.get("downsample"))
    return rendered.sensor, rendered.gt


def verify_manifest(
    manifest: DatasetManifest,
    mask: HeightMap,
    cfg: SimConfig,
    *,
    fraction: float = 0.01,
    seed: int = 0,
) -> list[int]:
    """Regenerates a random ``fraction`` of the items (at least one) and returns the indices whose stored files
    differ from the recomputation."""

    if not len(manifest):
        return []
    manifest.check(mask, cfg)
    count = min(len(manifest), max(1, round(fraction * len(manifest))))
    picks = sorted(int(i) for i in np.random.default_rng(seed).choice(len(manifest), size=count, replace=False))
    psf = build_psf_stack(mask, cfg)

    bad: list[int] = []
    for index in picks:
        entry = manifest[index]
        sensor, gt = regenerate_item(manifest, index, mask, cfg, psf=psf)
        stored = load_sensor_image(manifest.root / entry.sensor_path)
        stored_gt = load_rgb_png(manifest.root / entry.gt_path)
        if not np.array_equal(stored.counts, sensor.counts) or not np.array_equal(
            stored_gt, np.round(gt * 65535) / 65535
        ):
            bad.append(index)
    log.info("Verified %d items, %d mismatches", len(picks), len(bad))
    return bad
