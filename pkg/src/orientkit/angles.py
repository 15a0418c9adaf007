"""Angular arithmetic shared by every other module.

All angles are plain floats in degrees. Azimuth and rotation live on the
circle [0, 360); polar lives on the closed interval [0, 180] and never wraps.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"expected a finite angle, got {v!r}")


def wrap_azimuth(a: float) -> float:
    _check_finite(a)
    w = math.fmod(a, 360.0)
    if w < 0.0:
        w += 360.0
    # fmod(-1e-17, 360) + 360 rounds to exactly 360
    if w >= 360.0:
        w = 0.0
    return w + 0.0


def circular_abs_error(a: float, b: float) -> float:
    """Shortest arc between two headings, in [0, 180]."""
    _check_finite(a, b)
    d = math.fmod(abs(a - b), 360.0)
    return min(d, 360.0 - d)


def polar_abs_error(a: float, b: float) -> float:
    for v in (a, b):
        if not (0.0 <= v <= 180.0):
            raise DomainError(f"polar angle must lie in [0, 180], got {v!r}")
    return abs(a - b)


class Direction8(enum.Enum):
    FacingViewer = 0
    FrontLeft = 1
    Left = 2
    BackLeft = 3
    Away = 4
    BackRight = 5
    Right = 6
    FrontRight = 7


def direction8_of(azimuth: float) -> Direction8:
    """Bin a heading into one of eight 45 degree sectors centred on 0, 45, ..., 315.

    Sectors are half-open on the right: exactly 22.5 belongs to FrontLeft.
    """
    a = wrap_azimuth(azimuth)
    return Direction8(int(math.floor((a + 22.5) / 45.0)) % 8)


@dataclass(frozen=True)
class Orientation:
    polar: float = 90.0
    azimuth: float = 0.0
    rotation: float = 0.0
    has_front: bool = True

    def __post_init__(self):
        if not self.has_front:
            return
        _check_finite(self.polar, self.azimuth, self.rotation)
        if not (0.0 <= self.polar <= 180.0):
            raise DomainError(f"polar angle must lie in [0, 180], got {self.polar!r}")
        object.__setattr__(self, "azimuth", wrap_azimuth(self.azimuth))
        object.__setattr__(self, "rotation", wrap_azimuth(self.rotation))

    @classmethod
    def no_front(cls) -> "Orientation":
        return cls(has_front=False)
