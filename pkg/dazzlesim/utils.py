from __future__ import annotations

import hashlib
import json
import logging
import logging.handlers
import re
import subprocess
from typing import TYPE_CHECKING, Any, Literal, NamedTuple

if TYPE_CHECKING:
    from pathlib import Path

__all__ = ("MISSING", "canonical_digest", "git_describe", "setup_logging")

log = logging.getLogger(__name__)


class _MissingSentinel:
    """A type safe sentinel used in the library to represent something as missing. Used to distinguish from ``None`` values."""

    def __bool__(self) -> bool:
        return False

    def __eq__(self, other: Any) -> bool:
        return False

    def __hash__(self) -> int:
        return 0

    def __repr__(self) -> str:
        return "..."


MISSING: Any = _MissingSentinel()

LOG_FORMAT = "[{asctime}] [{levelname:<8}] {name}: {message}"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

_logging_formatter_status: tuple[logging.Logger, logging.Handler] | None = None


def setup_logging(
    *,
    formatter: logging.Formatter | None = None,
    handler: logging.Handler | None = None,
    logger: logging.Logger | None = None,
    filename: str | Path = "dazzlesim.log",
) -> tuple[logging.Logger, logging.Handler]:
    r"""Attaches dazzlesim's log handler, replacing the one a previous call attached.

    Parameters
    ----------
    formatter: Optional[:class:`logging.Formatter`]
        Defaults to ``[{asctime}] [{levelname:<8}] {name}: {message}``.
    handler: Optional[:class:`logging.Handler`]
        Defaults to a :class:`logging.handlers.RotatingFileHandler` on ``filename`` that keeps one backup of at most
        1 MB.
    logger: Optional[:class:`logging.Logger`]
        Defaults to the root logger. Its level is set to ``DEBUG``.
    filename: :class:`str` | :class:`pathlib.Path`
        The log file used when ``handler`` is not given.

    Returns
    -------
    tuple[:class:`logging.Logger`, :class:`logging.Handler`]
        The logger and the handler now attached to it.
    """

    global _logging_formatter_status
    if _logging_formatter_status is not None:
        old_logger, old_handler = _logging_formatter_status
        old_logger.removeHandler(old_handler)
        old_handler.close()

    if handler is None:
        handler = logging.handlers.RotatingFileHandler(filename, maxBytes=1_000_000, backupCount=1, encoding="UTF-8")
    handler.setFormatter(formatter or logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT, style="{"))

    logger = logging.getLogger() if logger is None else logger
    logger.setLevel(logging.DEBUG)
    logger.addHandler(handler)

    _logging_formatter_status = logger, handler
    return _logging_formatter_status


def canonical_digest(data: Any) -> str:
    """Returns the SHA-256 hex digest of ``data`` serialized as canonical JSON (sorted keys, no whitespace)."""

    payload = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def git_describe() -> str:
    """Returns ``git describe --always --dirty`` for the current checkout, or ``"unknown"`` outside a repository."""

    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            check=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        log.debug("git describe unavailable")
        return "unknown"
    return out.stdout.decode().strip() or "unknown"


ReleaseLevel = Literal["alpha", "beta", "candidate", "final"]

_VERSION_RE = re.compile(r"(?P<major>\d+)\.(?P<minor>\d+)\.(?P<micro>\d+)(?P<level>a|b|rc)?")
_RELEASE_LEVELS: dict[str | None, ReleaseLevel] = {"a": "alpha", "b": "beta", "rc": "candidate", None: "final"}


class VersionInfo(NamedTuple):
    major: int
    minor: int
    micro: int
    releaselevel: ReleaseLevel

    @classmethod
    def _from_str(cls, txt: str) -> VersionInfo:
        match = _VERSION_RE.fullmatch(txt)
        if match is None:
            raise ValueError(f"{txt!r} is not a version of the form major.minor.micro[a|b|rc]")
        return cls(
            int(match["major"]),
            int(match["minor"]),
            int(match["micro"]),
            _RELEASE_LEVELS[match["level"]],
        )
