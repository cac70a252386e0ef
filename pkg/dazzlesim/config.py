from __future__ import annotations

import json
import logging
import math
import os
from pathlib import Path
from typing import TYPE_CHECKING, Any, ClassVar, Literal, NamedTuple, Self

import numpy as np

from .base_object import Base
from .errors import ConfigError, WavelengthOutOfRange
from .utils import canonical_digest

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from ._types.config import RawSimConfig

log = logging.getLogger(__name__)

__all__ = (
    "CONSTANTS",
    "SEED_ENV_VAR",
    "PhysicalConstants",
    "SimConfig",
    "WavelengthGrid",
    "config_from_dict",
    "derive_seed",
    "dump_config",
    "load_config",
)

SEED_ENV_VAR = "DAZZLESIM_SEED"
GainMode = Literal["e_per_dn", "dn_per_e"]


class PhysicalConstants(NamedTuple):
    planck: float = 6.63e-34
    light_speed: float = 3e8


CONSTANTS = PhysicalConstants()


class WavelengthGrid:
    r"""An ordered, uniformly spaced set of band-center wavelengths.

    .. container:: operations

        .. describe:: len(x)

            Returns the number of bands.

        .. describe:: x == y

            Checks if two grids have the same bounds and band count.

    Attributes
    ----------
    lambda_min: :class:`float`
        The first band center in meters.
    lambda_max: :class:`float`
        The last band center in meters.
    n_bands: :class:`int`
        The number of bands.
    """

    __slots__ = ("_lambdas", "lambda_max", "lambda_min", "n_bands")

    def __init__(self, lambda_min: float, lambda_max: float, n_bands: int) -> None:
        if not lambda_min < lambda_max:
            raise ConfigError("lambda_min", "must be smaller than lambda_max")
        if n_bands < 2:
            raise ConfigError("n_bands", "needs at least two bands")
        self.lambda_min = float(lambda_min)
        self.lambda_max = float(lambda_max)
        self.n_bands = int(n_bands)
        self._lambdas = np.linspace(self.lambda_min, self.lambda_max, self.n_bands)
        self._lambdas.flags.writeable = False

    @property
    def lambdas(self) -> NDArray[np.float64]:
        """:class:`numpy.ndarray` The band centers in meters, strictly increasing."""
        return self._lambdas

    @property
    def nm(self) -> NDArray[np.float64]:
        """:class:`numpy.ndarray` The band centers in nanometers."""
        return self._lambdas * 1e9

    @property
    def delta_lambda(self) -> float:
        """:class:`float` The sampling interval in meters."""
        return (self.lambda_max - self.lambda_min) / (self.n_bands - 1)

    def index_of(self, wavelength: float, *, atol: float = 1e-12) -> int:
        """Returns the index of the band centered on ``wavelength``.

        Raises
        ------
        WavelengthOutOfRange
            No band center lies within ``atol`` of ``wavelength``.
        """

        idx = int(np.argmin(np.abs(self._lambdas - wavelength)))
        if abs(self._lambdas[idx] - wavelength) > atol:
            raise WavelengthOutOfRange(wavelength, self.lambda_min, self.lambda_max)
        return idx

    def nearest_index(self, wavelength: float) -> int:
        if not self.lambda_min <= wavelength <= self.lambda_max:
            raise WavelengthOutOfRange(wavelength, self.lambda_min, self.lambda_max)
        return int(np.argmin(np.abs(self._lambdas - wavelength)))

    def __len__(self) -> int:
        return self.n_bands

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WavelengthGrid):
            return NotImplemented
        return (self.lambda_min, self.lambda_max, self.n_bands) == (
            other.lambda_min,
            other.lambda_max,
            other.n_bands,
        )

    def __hash__(self) -> int:
        return hash((self.lambda_min, self.lambda_max, self.n_bands))

    def __repr__(self) -> str:
        return f"<WavelengthGrid {self.lambda_min * 1e9:g}-{self.lambda_max * 1e9:g} nm bands={self.n_bands}>"


# field name -> (alias, units per SI unit)
_UNIT_ALIASES: dict[str, tuple[str, float]] = {
    "lambda_min": ("lambda_min_nm", 1e9),
    "lambda_max": ("lambda_max_nm", 1e9),
    "aperture_diameter": ("aperture_diameter_mm", 1e3),
    "pupil_pitch": ("pupil_pitch_um", 1e6),
    "sensor_pitch": ("sensor_pitch_um", 1e6),
    "doe_h_max": ("doe_h_max_um", 1e6),
}

_POSITIVE_FIELDS = (
    "focal_length",
    "exposure_time",
    "aperture_diameter",
    "gain",
    "full_well",
    "pupil_pitch",
    "sensor_pitch",
    "doe_h_max",
    "smooth_max_beta",
)
_NON_NEGATIVE_FIELDS = (
    "read_noise_mean",
    "read_noise_std",
    "dark_current",
    "blur_sigma_px",
    "flare_fraction",
)


def _number(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(name, "must be finite")
    return float(value)


def _integer(name: str, value: Any) -> int:
    if isinstance(value, bool):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return value


def _resolution(name: str, value: Any) -> tuple[int, int]:
    if isinstance(value, int) and not isinstance(value, bool):
        value = (value, value)
    if not isinstance(value, (list, tuple)) or len(value) != 2:  # pyright: ignore[reportUnknownArgumentType]
        raise ConfigError(name, f"expected [rows, cols], got {value!r}")
    rows, cols = (_integer(name, v) for v in value)  # pyright: ignore[reportUnknownVariableType]
    if rows <= 0 or cols <= 0:
        raise ConfigError(name, "must be strictly positive")
    return rows, cols


class SimConfig(Base["RawSimConfig"]):
    r"""Every physical and numerical parameter of a run. Immutable once built.

    All lengths are in meters, times in seconds and charges in electrons. Resolutions use numpy
    shape order, ``(rows, cols)``. The defaults reproduce the physical parameter table of the
    simulated camera.

    .. container:: operations

        .. describe:: x == y

            Checks if two configs hold identical values.

        .. describe:: hash(x)

            Returns the hash of the config, so it can key caches.

    Attributes
    ----------
    lambda_min: :class:`float`
        First band center (400 nm).
    lambda_max: :class:`float`
        Last band center (700 nm).
    n_bands: :class:`int`
        Band count (31).
    focal_length: :class:`float`
        ``f`` (0.11 m).
    exposure_time: :class:`float`
        ``t`` (0.1 s).
    aperture_diameter: :class:`float`
        ``W_a`` (11 mm).
    quantum_efficiency: :class:`float`
        ``Q_e`` (0.56).
    gain: :class:`float`
        ``G`` (0.37). How it applies is set by ``gain_mode``.
    full_well: :class:`float`
        ``e_sat`` (25500 e⁻).
    read_noise_mean: :class:`float`
        ``μ_r`` (390 e⁻).
    read_noise_std: :class:`float`
        ``σ_r`` (10.5 e⁻).
    dark_current: :class:`float`
        ``μ_c`` (0.002 e⁻).
    bpc: :class:`int`
        Bits per channel (16).
    pupil_pitch: :class:`float`
        ``Δu = Δv`` (3.74 µm).
    sensor_pitch: :class:`float`
        ``Δx = Δy`` (2.9 µm).
    pupil_res: tuple[:class:`int`, :class:`int`]
        Pupil samples (2160, 2160).
    sensor_res: tuple[:class:`int`, :class:`int`]
        Sensor pixels (2048, 2048).
    dispersion_a: :class:`float`
        Constant term of the Cauchy index difference ``Δn(λ) = A + B/λ²`` (0.46).
    dispersion_b: :class:`float`
        Quadratic term of the same law in m² (0).
    doe_h_max: :class:`float`
        Largest DOE height (1.6 µm).
    rng_seed: :class:`int`
        Base seed of the run, ``0 <= seed < 2**64``.
    gain_mode: :class:`str`
        ``"e_per_dn"`` divides electrons by ``G``; ``"dn_per_e"`` multiplies them.
    smooth_max_beta: :class:`float`
        Temperature of the smooth peak used while differentiating (50).
    blur_sigma_px: :class:`float`
        Gaussian smoothing of optimized heights in pupil samples (2). ``0`` disables it.
    flare_fraction: :class:`float`
        Share of the laser band energy redistributed as flare (0.05).
    """

    __slots__ = (
        "_frozen",
        "aperture_diameter",
        "blur_sigma_px",
        "bpc",
        "dark_current",
        "dispersion_a",
        "dispersion_b",
        "doe_h_max",
        "exposure_time",
        "flare_fraction",
        "focal_length",
        "full_well",
        "gain",
        "gain_mode",
        "lambda_max",
        "lambda_min",
        "n_bands",
        "pupil_pitch",
        "pupil_res",
        "quantum_efficiency",
        "read_noise_mean",
        "read_noise_std",
        "rng_seed",
        "sensor_pitch",
        "sensor_res",
        "smooth_max_beta",
    )

    DEFAULTS: ClassVar[dict[str, Any]] = {
        "lambda_min": 400e-9,
        "lambda_max": 700e-9,
        "n_bands": 31,
        "focal_length": 0.11,
        "exposure_time": 0.1,
        "aperture_diameter": 11e-3,
        "quantum_efficiency": 0.56,
        "gain": 0.37,
        "full_well": 25500.0,
        "read_noise_mean": 390.0,
        "read_noise_std": 10.5,
        "dark_current": 0.002,
        "bpc": 16,
        "pupil_pitch": 3.74e-6,
        "sensor_pitch": 2.9e-6,
        "pupil_res": (2160, 2160),
        "sensor_res": (2048, 2048),
        "dispersion_a": 0.46,
        "dispersion_b": 0.0,
        "doe_h_max": 1.6e-6,
        "rng_seed": 0,
        "gain_mode": "e_per_dn",
        "smooth_max_beta": 50.0,
        "blur_sigma_px": 2.0,
        "flare_fraction": 0.05,
    }

    lambda_min: float
    lambda_max: float
    n_bands: int
    focal_length: float
    exposure_time: float
    aperture_diameter: float
    quantum_efficiency: float
    gain: float
    full_well: float
    read_noise_mean: float
    read_noise_std: float
    dark_current: float
    bpc: int
    pupil_pitch: float
    sensor_pitch: float
    pupil_res: tuple[int, int]
    sensor_res: tuple[int, int]
    dispersion_a: float
    dispersion_b: float
    doe_h_max: float
    rng_seed: int
    gain_mode: GainMode
    smooth_max_beta: float
    blur_sigma_px: float
    flare_fraction: float

    def __init__(self, **fields: Any) -> None:
        unknown = set(fields) - set(self.DEFAULTS)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")

        values = {**self.DEFAULTS, **fields}
        object.__setattr__(self, "_frozen", False)
        for name, value in self._validate(values).items():
            object.__setattr__(self, name, value)
        object.__setattr__(self, "_frozen", True)

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError(f"SimConfig is immutable, use replace({name}=...)")

    @staticmethod
    def _validate(values: dict[str, Any]) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in ("lambda_min", "lambda_max", "quantum_efficiency", "dispersion_a", "dispersion_b"):
            out[name] = _number(name, values[name])
        for name in _POSITIVE_FIELDS:
            out[name] = _number(name, values[name])
            if out[name] <= 0:
                raise ConfigError(name, "must be strictly positive")
        for name in _NON_NEGATIVE_FIELDS:
            out[name] = _number(name, values[name])
            if out[name] < 0:
                raise ConfigError(name, "must not be negative")

        if out["lambda_min"] <= 0:
            raise ConfigError("lambda_min", "must be strictly positive")
        if not out["lambda_min"] < out["lambda_max"]:
            raise ConfigError("lambda_min", "must be smaller than lambda_max")

        out["n_bands"] = _integer("n_bands", values["n_bands"])
        if out["n_bands"] < 2:
            raise ConfigError("n_bands", "needs at least two bands")

        if not 0 < out["quantum_efficiency"] <= 1:
            raise ConfigError("quantum_efficiency", "must lie in (0, 1]")

        out["bpc"] = _integer("bpc", values["bpc"])
        if not 8 <= out["bpc"] <= 16:
            raise ConfigError("bpc", "must lie in [8, 16]")

        if out["flare_fraction"] > 1:
            raise ConfigError("flare_fraction", "must not exceed 1")
        if out["smooth_max_beta"] <= 1:
            raise ConfigError("smooth_max_beta", "must exceed 1")

        out["pupil_res"] = _resolution("pupil_res", values["pupil_res"])
        out["sensor_res"] = _resolution("sensor_res", values["sensor_res"])

        seed = _integer("rng_seed", values["rng_seed"])
        if not 0 <= seed < 2**64:
            raise ConfigError("rng_seed", "must fit in an unsigned 64-bit integer")
        out["rng_seed"] = seed

        if values["gain_mode"] not in ("e_per_dn", "dn_per_e"):
            raise ConfigError("gain_mode", "must be 'e_per_dn' or 'dn_per_e'")
        out["gain_mode"] = values["gain_mode"]

        lambdas = np.array([out["lambda_min"], out["lambda_max"]])
        if np.any(out["dispersion_a"] + out["dispersion_b"] / lambdas**2 <= 0):
            raise ConfigError("dispersion_a", "index difference must stay positive")
        return out

    @classmethod
    def desk(cls, **changes: Any) -> Self:
        """Desk-scale preset: 128² pupil at 100 µm, 128² sensor, five bands from 450 to 650 nm."""

        base = {
            "pupil_res": (128, 128),
            "pupil_pitch": 100e-6,
            "sensor_res": (128, 128),
            "n_bands": 5,
            "lambda_min": 450e-9,
            "lambda_max": 650e-9,
        }
        return cls(**{**base, **changes})

    @classmethod
    def full_scale(cls, **changes: Any) -> Self:
        """Full-resolution preset. The pupil pitch is widened so the sample grid spans the aperture."""

        n_u = max(cls.DEFAULTS["pupil_res"])
        base = {"pupil_pitch": cls.DEFAULTS["aperture_diameter"] / n_u}
        return cls(**{**base, **changes})

    def replace(self, **changes: Any) -> SimConfig:
        return SimConfig(**{**self._field_values(), **changes})

    def _field_values(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self.DEFAULTS}

    def to_dict(self) -> RawSimConfig:
        data = self._field_values()
        data["pupil_res"] = list(self.pupil_res)
        data["sensor_res"] = list(self.sensor_res)
        return data  # pyright: ignore[reportReturnType]

    @classmethod
    def from_dict(cls, data: RawSimConfig) -> Self:
        return cls(**_resolve_aliases(dict(data)))

    def digest(self) -> str:
        """:class:`str` SHA-256 of the canonical JSON form, used as the config hash in sidecars and manifests."""
        return canonical_digest(self.to_dict())

    @property
    def grid(self) -> WavelengthGrid:
        """:class:`WavelengthGrid` The run's wavelength grid."""
        return WavelengthGrid(self.lambda_min, self.lambda_max, self.n_bands)

    @property
    def s_sat(self) -> int:
        """:class:`int` The largest digital count, ``2**bpc - 1``."""
        return 2**self.bpc - 1

    def delta_n(self, wavelength: ArrayLike) -> NDArray[np.float64]:
        """Cauchy index difference ``A + B/λ²`` at ``wavelength`` (meters)."""
        lam = np.asarray(wavelength, dtype=np.float64)
        return self.dispersion_a + self.dispersion_b / lam**2

    def __repr__(self) -> str:
        return (
            f"<SimConfig pupil={self.pupil_res}@{self.pupil_pitch * 1e6:g}um "
            f"sensor={self.sensor_res}@{self.sensor_pitch * 1e6:g}um bands={self.n_bands} seed={self.rng_seed}>"
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SimConfig):
            return NotImplemented
        return self._field_values() == other._field_values()

    def __hash__(self) -> int:
        return hash(tuple(self._field_values().values()))


def _resolve_aliases(data: dict[str, Any]) -> dict[str, Any]:
    for name, (alias, per_si) in _UNIT_ALIASES.items():
        if alias not in data:
            continue
        if name in data:
            raise ConfigError(alias, f"given together with {name!r}")
        data[name] = _number(alias, data.pop(alias)) / per_si
    return data


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw.strip(), 0)
    except ValueError:
        raise ConfigError("rng_seed", f"{SEED_ENV_VAR}={raw!r} is not an integer") from None


def config_from_dict(
    data: dict[str, Any], *, base: SimConfig | None = None, use_env: bool = True
) -> SimConfig:
    r"""Builds a validated :class:`SimConfig` from a JSON object.

    Parameters
    ----------
    data: dict[:class:`str`, Any]
        Field values, either in SI units under their plain names or through the ``_nm``, ``_mm`` and ``_um`` aliases.
    base: Optional[:class:`SimConfig`]
        The config that supplies unspecified fields. Defaults to the physical parameter table.
    use_env: :class:`bool`
        Whether ``DAZZLESIM_SEED`` may override ``rng_seed``.

    Raises
    ------
    ConfigError
        A field is unknown, malformed or violates an invariant.
    """

    resolved = _resolve_aliases(dict(data))
    if use_env:
        seed = _env_seed()
        if seed is not None:
            log.info("rng_seed overridden from %s: %d", SEED_ENV_VAR, seed)
            resolved["rng_seed"] = seed

    if base is None:
        return SimConfig(**resolved)
    return base.replace(**resolved)


def load_config(path: str | Path, *, base: SimConfig | None = None) -> SimConfig:
    """Reads a JSON config file. Unspecified fields take their defaults (or the values of ``base``)."""

    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError("<file>", f"unable to read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"{path} is not valid JSON: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigError("<file>", f"{path} must hold a JSON object")

    cfg = config_from_dict(raw, base=base)  # pyright: ignore[reportUnknownArgumentType]
    log.debug("Loaded %r from %s", cfg, path)
    return cfg


def dump_config(cfg: SimConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2), encoding="utf-8")


def derive_seed(base_seed: int, item_index: int) -> int:
    """Mixes ``base_seed`` and ``item_index`` into an independent 64-bit seed through :class:`numpy.random.SeedSequence`."""

    seq = np.random.SeedSequence(int(base_seed), spawn_key=(int(item_index),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
