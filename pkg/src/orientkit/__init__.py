"""Orientation estimation toolkit: angle grids, objective, renderer, estimator, annotation and evaluation."""

from .angles import Direction8, DomainError, Orientation, circular_abs_error, direction8_of, wrap_azimuth
from .objective import ObjectiveConfig, ObjectiveKind

__version__ = "0.1.0"

__all__ = [
    "Direction8",
    "DomainError",
    "ObjectiveConfig",
    "ObjectiveKind",
    "Orientation",
    "circular_abs_error",
    "direction8_of",
    "wrap_azimuth",
]
