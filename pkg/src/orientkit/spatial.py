"""Text templates for object direction and pairwise relations, and multi-view voting."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .angles import DomainError, circular_abs_error, direction8_of, wrap_azimuth


class AmbiguousOrderError(DomainError):
    """Two objects share an x coordinate, so left/right is undefined."""


class InconclusiveVoteError(DomainError):
    pass


@lru_cache(maxsize=1)
def templates() -> dict:
    return json.loads(resources.files("orientkit").joinpath("data/templates.json").read_text(encoding="utf-8"))


@dataclass(frozen=True)
class PlacedObject:
    name: str
    x: float
    y: float
    azimuth: float | None = None

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise DomainError(f"image coordinates must be >= 0, got ({self.x}, {self.y})")
        if self.azimuth is not None:
            object.__setattr__(self, "azimuth", wrap_azimuth(self.azimuth))


def describe_direction(obj: PlacedObject) -> str:
    if obj.azimuth is None:
        raise DomainError(f"{obj.name} has no predicted azimuth")
    return templates()["direction"][direction8_of(obj.azimuth).name].format(obj=obj.name)


def relation_sector(azimuth: float) -> str:
    """One of front/left/back/right, sectors half-open on the right."""
    a = wrap_azimuth(azimuth)
    for sec in templates()["relation_sectors"]:
        lo, hi = sec["start"], sec["end"]
        inside = lo <= a < hi if lo < hi else (a >= lo or a < hi)
        if inside:
            return sec["name"]
    raise AssertionError(f"relation sectors do not cover {a}")


def describe_relation(obj1: PlacedObject, obj2: PlacedObject) -> str:
    """Left/right order in the image followed by where obj2 lies relative to obj1's facing."""
    if obj1.azimuth is None:
        raise DomainError(f"{obj1.name} has no predicted azimuth")
    if obj1.x == obj2.x:
        raise AmbiguousOrderError(f"{obj1.name} and {obj2.name} share x = {obj1.x}")
    t = templates()
    branch = "obj1_left" if obj1.x < obj2.x else "obj2_left"
    names = {"obj1": obj1.name, "obj2": obj2.name}
    order = t["relation_order"][branch].format(**names)
    rel = t["relation"][branch][relation_sector(obj1.azimuth)].format(**names)
    return f"{order} {rel}"


@dataclass(frozen=True)
class ViewObservation:
    camera_azimuth: float
    predicted_azimuth: float
    confidence: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "camera_azimuth", wrap_azimuth(self.camera_azimuth))
        object.__setattr__(self, "predicted_azimuth", wrap_azimuth(self.predicted_azimuth))
        if not (0.0 <= self.confidence <= 1.0):
            raise DomainError(f"confidence must lie in [0, 1], got {self.confidence}")

    @property
    def heading(self) -> float:
        """World heading of the object's front implied by this view."""
        return wrap_azimuth(self.camera_azimuth - self.predicted_azimuth)


@dataclass(frozen=True)
class Vote:
    front_azimuth: float
    dispersion: float
    kept: int
    trimmed: int


def circular_median(angles) -> float:
    """The sample angle minimising the summed arc distance to all others (first on ties)."""
    best, best_cost = None, math.inf
    for c in angles:
        cost = sum(circular_abs_error(c, a) for a in angles)
        if cost < best_cost:
            best, best_cost = c, cost
    return best


def vote_orientation(observations, trim: float = 90.0) -> Vote:
    """Fuse per-view azimuth predictions into one world heading.

    Candidates farther than ``trim`` degrees from their circular median are
    dropped; the rest are averaged as confidence-weighted unit vectors.
    ``dispersion`` is the circular standard deviation of the kept candidates.
    """
    obs = list(observations)
    if not obs:
        raise DomainError("no observations to vote on")
    cands = [o.heading for o in obs]
    med = circular_median(cands)
    kept = [(c, o.confidence) for c, o in zip(cands, obs) if circular_abs_error(c, med) <= trim]
    w = np.array([k[1] for k in kept], dtype=np.float64)
    if not kept or w.sum() <= 0:
        raise InconclusiveVoteError("every observation was trimmed or carries zero confidence")
    rad = np.radians([k[0] for k in kept])
    s, c = float(w @ np.sin(rad)), float(w @ np.cos(rad))
    r = math.hypot(s, c) / float(w.sum())
    if r < 1e-12:
        raise InconclusiveVoteError("kept candidates cancel out; no mean heading")
    if len(set(k[0] for k in kept)) == 1:
        heading, dispersion = kept[0][0], 0.0
    else:
        heading = wrap_azimuth(math.degrees(math.atan2(s, c)))
        dispersion = math.degrees(math.sqrt(max(0.0, -2.0 * math.log(min(1.0, r)))))
    return Vote(heading, dispersion, len(kept), len(obs) - len(kept))
