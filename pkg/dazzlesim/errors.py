from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Sequence

__all__ = (
    "ApertureTooLarge",
    "ConfigError",
    "DegenerateMaskError",
    "GridMismatchError",
    "InvalidMaskParameters",
    "MetadataMismatch",
    "OptimizationDiverged",
    "PropagationError",
    "ShapeMismatch",
    "ShiftOutOfRange",
    "SimulatorException",
    "WavelengthOutOfRange",
)


class SimulatorException(Exception):
    r"""The base class for every error raised by dazzlesim."""


class ConfigError(SimulatorException):
    r"""This is raised when a configuration can not be parsed or violates one of its invariants.

    Attributes
    -----------
    field: :class:`str`
        The name of the offending field, or ``"<file>"`` for parse failures.
    reason: :class:`str`
        What was wrong with it.
    """

    def __init__(self, field: str, reason: str) -> None:
        self.field = field
        self.reason = reason
        super().__init__(f"Invalid config field {field!r}: {reason}")


class GridMismatchError(SimulatorException):
    r"""This is raised when two objects that must share a wavelength grid or a spatial shape do not.

    Attributes
    -----------
    expected: Any
        The grid or shape that was required.
    got: Any
        The grid or shape that was given.
    """

    def __init__(self, expected: Any, got: Any) -> None:
        self.expected = expected
        self.got = got
        super().__init__(f"Grid mismatch: expected {expected!r}, got {got!r}")


class ShapeMismatch(GridMismatchError):
    r"""This is raised when two images handed to a metric have different shapes."""


class WavelengthOutOfRange(SimulatorException):
    r"""This is raised when a wavelength falls outside the support of a table or a grid.

    Attributes
    -----------
    wavelength: :class:`float`
        The offending wavelength in meters.
    low: :class:`float`
        The lower bound of the support in meters.
    high: :class:`float`
        The upper bound of the support in meters.
    """

    def __init__(self, wavelength: float, low: float, high: float) -> None:
        self.wavelength = wavelength
        self.low = low
        self.high = high
        super().__init__(
            f"Wavelength {wavelength * 1e9:.3f} nm is outside [{low * 1e9:.1f}, {high * 1e9:.1f}] nm"
        )


class ApertureTooLarge(SimulatorException):
    r"""This is raised when the pupil grid does not cover the circular aperture.

    Attributes
    -----------
    extent: :class:`float`
        The smaller side of the pupil grid in meters.
    aperture: :class:`float`
        The aperture diameter in meters.
    """

    def __init__(self, extent: float, aperture: float) -> None:
        self.extent = extent
        self.aperture = aperture
        super().__init__(
            f"Pupil grid spans {extent * 1e3:.3f} mm which is smaller than the {aperture * 1e3:.3f} mm aperture"
        )


class PropagationError(SimulatorException):
    r"""This is raised when the sensor window is wider than one alias period of the scaled propagation.

    Attributes
    -----------
    ratio: :class:`float`
        The sensor extent ``Δx·N_x`` divided by the native FFT pitch ``λ·f/(N_u·Δu)``.
    limit: :class:`float`
        The largest ratio that stays alias free, ``N_u``.
    wavelength: :class:`float`
        The band that failed, in meters.
    """

    def __init__(self, ratio: float, limit: float, wavelength: float) -> None:
        self.ratio = ratio
        self.limit = limit
        self.wavelength = wavelength
        super().__init__(
            f"Scaled propagation at {wavelength * 1e9:.1f} nm is out of range: "
            f"Δx·N_x / (λf/(N_u·Δu)) = {ratio:.4g} exceeds {limit:.4g}"
        )


class ShiftOutOfRange(SimulatorException):
    r"""This is raised when a laser footprint would land outside the computational frame.

    Attributes
    -----------
    shift: tuple[:class:`float`, :class:`float`]
        The requested ``(Δl_y, Δl_x)`` shift in pixels.
    limit: :class:`float`
        The largest allowed absolute shift in pixels.
    """

    def __init__(self, shift: tuple[float, float], limit: float) -> None:
        self.shift = shift
        self.limit = limit
        super().__init__(
            f"Laser shift ({shift[0]:.2f}, {shift[1]:.2f}) px exceeds the {limit:.1f} px frame limit"
        )


class DegenerateMaskError(SimulatorException):
    r"""This is raised when a mask sends no energy onto the sensor in some band, which makes ``1/BSR`` undefined.

    Attributes
    -----------
    band: :class:`float`
        The wavelength of the degenerate band in meters.
    """

    def __init__(self, band: float) -> None:
        self.band = band
        super().__init__(f"Mask has zero in-sensor energy at {band * 1e9:.1f} nm")


class OptimizationDiverged(SimulatorException):
    r"""This is raised when the DOE loss stays above ten times its initial value for too long.

    Attributes
    -----------
    history: list[dict[:class:`str`, :class:`float`]]
        The per-iteration history recorded up to the abort.
    """

    def __init__(self, history: Sequence[dict[str, float]]) -> None:
        self.history = list(history)
        super().__init__(
            f"Optimization diverged after {len(self.history)} iterations"
        )


class InvalidMaskParameters(SimulatorException):
    r"""This is raised when the parameters of a parametric mask are out of range.

    Attributes
    -----------
    reason: :class:`str`
        What was wrong with them.
    """

    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(reason)


class MetadataMismatch(SimulatorException):
    r"""This is raised when the hashes stored next to an image or manifest do not match the supplied config or mask.

    Attributes
    -----------
    kind: :class:`str`
        Either ``"config"`` or ``"mask"``.
    expected: :class:`str`
        The hash recorded in the metadata.
    got: :class:`str`
        The hash of the supplied object.
    """

    def __init__(self, kind: str, expected: str, got: str) -> None:
        self.kind = kind
        self.expected = expected
        self.got = got
        super().__init__(
            f"{kind} hash mismatch: metadata has {expected[:12]}, supplied {got[:12]}"
        )
