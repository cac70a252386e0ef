from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

import cv2
import numpy as np

from .camera import Scenario, SensorImage
from .config import WavelengthGrid
from .errors import GridMismatchError
from .optics import HeightMap
from .spectral import SpectralCube
from .utils import git_describe

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Mapping, Sequence

    from numpy.typing import NDArray

    from ._types.io import RawCubeSidecar, RawHeightMapSidecar, RawRunManifest, RawSensorSidecar
    from ._types.json import Jsonable
    from .config import SimConfig
    from .optics import PsfStack

log = logging.getLogger(__name__)

__all__ = (
    "RUN_MANIFEST_SCHEMA",
    "SCENE_SUFFIXES",
    "export_psf_stack",
    "load_cube",
    "load_height_map",
    "load_rgb_png",
    "load_sensor_image",
    "read_jsonl",
    "save_cube",
    "save_height_map",
    "save_rgb_png16",
    "save_sensor_image",
    "sidecar_path",
    "write_csv",
    "write_jsonl",
    "write_run_manifest",
)

RUN_MANIFEST_SCHEMA = 1
SCENE_SUFFIXES = frozenset({".png", ".jpg", ".jpeg"})


def sidecar_path(path: str | Path) -> Path:
    """The JSON sidecar next to a data file, ``name.ext`` -> ``name.json``."""
    return Path(path).with_suffix(".json")


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")


def _read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def save_cube(cube: SpectralCube, path: str | Path) -> Path:
    r"""Writes a cube as little-endian float32, row-major with the band index fastest, plus its sidecar.

    Returns
    -------
    :class:`pathlib.Path`
        The sidecar path.
    """

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(cube.data, dtype="<f4").tofile(path)
    sidecar: RawCubeSidecar = {
        "width": cube.width,
        "height": cube.height,
        "bands": cube.bands,
        "wavelengths_nm": [float(x) for x in cube.grid.nm],
        "layout": "row-major-band-fastest",
        "dtype": "<f4",
    }
    side = sidecar_path(path)
    _write_json(side, sidecar)
    log.debug("Wrote cube %r to %s", cube, path)
    return side


def load_cube(path: str | Path) -> SpectralCube:
    r"""Reads a cube written by :func:`save_cube`.

    Raises
    ------
    GridMismatchError
        The raw file size or the wavelength list disagrees with the sidecar.
    """

    path = Path(path)
    meta: RawCubeSidecar = _read_json(sidecar_path(path))
    shape = (meta["height"], meta["width"], meta["bands"])
    data = np.fromfile(path, dtype="<f4")
    if data.size != shape[0] * shape[1] * shape[2]:
        raise GridMismatchError(shape, data.size)

    nm = meta["wavelengths_nm"]
    # nm -> m by division so the grid compares equal to one built from literal meters
    grid = WavelengthGrid(round(nm[0], 6) / 1e9, round(nm[-1], 6) / 1e9, len(nm))
    if len(nm) != shape[2] or not np.allclose(grid.nm, nm, rtol=0, atol=1e-6):
        raise GridMismatchError(list(grid.nm), nm)
    return SpectralCube(data.reshape(shape).astype(np.float64), grid, validate=False)


def export_psf_stack(stack: PsfStack, path: str | Path) -> Path:
    """Writes a PSF stack in the cube format, ``(N_y, N_x, bands)``."""
    cube = SpectralCube(np.moveaxis(stack.psfs, 0, -1), stack.grid, validate=False)
    return save_cube(cube, path)


def save_height_map(h: HeightMap, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(h.heights, dtype="<f4").tofile(path)
    n_v, n_u = h.shape
    sidecar: RawHeightMapSidecar = {
        "N_u": n_u,
        "N_v": n_v,
        "pitch_m": h.pitch,
        "h_max_m": h.h_max,
        "dtype": "<f4",
    }
    side = sidecar_path(path)
    _write_json(side, sidecar)
    log.info("Wrote mask %s to %s", h.digest()[:12], path)
    return side


def load_height_map(path: str | Path) -> HeightMap:
    r"""Reads a mask written by :func:`save_height_map`.

    Raises
    ------
    GridMismatchError
        The raw file size disagrees with the sidecar.
    FileNotFoundError
        The file or its sidecar is missing.
    """

    path = Path(path)
    meta: RawHeightMapSidecar = _read_json(sidecar_path(path))
    data = np.fromfile(path, dtype="<f4")
    shape = (meta["N_v"], meta["N_u"])
    if data.size != shape[0] * shape[1]:
        raise GridMismatchError(shape, data.size)
    return HeightMap(data.reshape(shape).astype(np.float64), meta["pitch_m"], meta["h_max_m"])


def save_rgb_png16(rgb: NDArray[np.float64], path: str | Path) -> None:
    """Writes an ``(H, W, 3)`` image in [0, 1] as a 16-bit RGB PNG."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    counts = np.round(np.clip(rgb, 0, 1) * 65535).astype(np.uint16)
    if not cv2.imwrite(str(path), cv2.cvtColor(counts, cv2.COLOR_RGB2BGR)):
        raise OSError(f"unable to write {path}")


def _read_png(path: Path) -> NDArray[Any]:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise OSError(f"unable to read image {path}")
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    elif img.shape[2] == 4:
        img = cv2.cvtColor(img, cv2.COLOR_BGRA2RGB)
    else:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    return img


def load_rgb_png(path: str | Path) -> NDArray[np.float64]:
    r"""Reads an 8- or 16-bit PNG or JPEG as an ``(H, W, 3)`` RGB image in [0, 1].

    Grayscale images are repeated over three channels and alpha is dropped.

    Raises
    ------
    OSError
        The file is missing or not a readable image.
    """

    img = _read_png(Path(path))
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255
    if img.dtype == np.uint16:
        return img.astype(np.float64) / 65535
    raise OSError(f"unsupported pixel type {img.dtype} in {path}")


def save_sensor_image(s: SensorImage, path: str | Path) -> Path:
    """Writes the counts as a 16-bit RGB PNG and everything needed to reproduce them as a sidecar."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), cv2.cvtColor(s.counts.astype(np.uint16), cv2.COLOR_RGB2BGR)):
        raise OSError(f"unable to write {path}")
    height, width = s.counts.shape[:2]
    sidecar: RawSensorSidecar = {
        "width": width,
        "height": height,
        "bpc": s.bpc,
        "seed": s.seed,
        "config_hash": s.config_hash,
        "mask_hash": s.mask_hash,
        "scenario": s.scenario.to_dict(),
        "saturated_pixels": s.saturated_pixels,
        "background_scale": s.background_scale,
    }
    side = sidecar_path(path)
    _write_json(side, sidecar)
    return side


def load_sensor_image(path: str | Path) -> SensorImage:
    path = Path(path)
    meta: RawSensorSidecar = _read_json(sidecar_path(path))
    counts = _read_png(path)
    if counts.shape[:2] != (meta["height"], meta["width"]):
        raise GridMismatchError((meta["height"], meta["width"]), counts.shape[:2])
    return SensorImage(
        counts,
        bpc=meta["bpc"],
        scenario=Scenario.from_dict(meta["scenario"]),
        seed=meta["seed"],
        config_hash=meta["config_hash"],
        mask_hash=meta["mask_hash"],
        background_scale=meta["background_scale"],
    )


def write_jsonl(rows: Iterable[Mapping[str, Any]], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True))
            f.write("\n")


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield json.loads(line)


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_run_manifest(
    path: str | Path,
    *,
    command: str,
    argv: Sequence[str],
    cfg: SimConfig,
    seed: int,
    outputs: Sequence[str | Path],
    extra: dict[str, Jsonable] | None = None,
) -> None:
    """Writes the JSON record every CLI run leaves behind."""

    data: RawRunManifest = {
        "schema_version": RUN_MANIFEST_SCHEMA,
        "command": command,
        "argv": list(argv),
        "config": cfg.to_dict(),
        "seed": seed,
        "git_describe": git_describe(),
        "outputs": [str(o) for o in outputs],
    }
    if extra:
        data["extra"] = extra
    _write_json(Path(path), data)
    log.info("Wrote run manifest %s", path)
