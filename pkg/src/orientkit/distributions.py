"""Target orientation distributions on 1-degree grids and their decoding.

Bin ``i`` (1-based, in degrees) is stored at array index ``i - 1``. For the
circular kinds bin 360 is the same heading as 0.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .angles import DomainError, wrap_azimuth


class GridKind(enum.Enum):
    Polar180 = "polar"
    Azimuth360 = "azimuth"
    Rotation360 = "rotation"

    @property
    def size(self) -> int:
        return 180 if self is GridKind.Polar180 else 360

    @property
    def circular(self) -> bool:
        return self is not GridKind.Polar180


@dataclass(frozen=True)
class AngleGrid:
    kind: GridKind
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size != self.kind.size:
            raise DomainError(f"{self.kind.name} grid needs {self.kind.size} bins, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("grid probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise DomainError(f"grid probabilities sum to {p.sum()!r}, not 1")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def bins(self) -> np.ndarray:
        return np.arange(1, self.kind.size + 1, dtype=np.float64)

    def at(self, degree: int) -> float:
        """Probability of the 1-based bin ``degree`` (0 aliases 360 on circular grids)."""
        if self.kind.circular and degree == 0:
            degree = 360
        return float(self.probs[degree - 1])


def bessel_i0(x: float, rtol: float = 1e-16) -> float:
    """Zero-order modified Bessel function of the first kind by its power series.

    Terms are accumulated until one drops below ``rtol`` times the partial sum.
    """
    if not math.isfinite(x) or x < 0:
        raise DomainError(f"bessel_i0 needs a finite x >= 0, got {x!r}")
    q = (x / 2.0) ** 2
    term = 1.0
    total = 1.0
    n = 0
    while True:
        n += 1
        term *= q / (n * n)
        total += term
        if term < rtol * total:
            return total


def _check_sigma(sigma: float) -> None:
    if not math.isfinite(sigma) or sigma <= 0:
        raise DomainError(f"sigma must be a positive finite number of degrees, got {sigma!r}")


def gaussian_polar_target(theta: float, sigma: float) -> AngleGrid:
    _check_sigma(sigma)
    if not (0.0 <= theta <= 180.0):
        raise DomainError(f"polar angle must lie in [0, 180], got {theta!r}")
    return AngleGrid(GridKind.Polar180, polar_target_probs(np.array([theta]), sigma)[0])


def von_mises_concentration(sigma: float) -> float:
    """Concentration 1/sigma^2 with sigma converted from degrees to radians."""
    _check_sigma(sigma)
    s = math.radians(sigma)
    return 1.0 / (s * s)


def circular_target(mu: float, sigma: float, kind: GridKind = GridKind.Azimuth360) -> AngleGrid:
    """Discretised circular Gaussian centred on ``mu``, renormalised over the 360 bins.

    The analytic normaliser 2*pi*I0(kappa) cancels on renormalisation, so the
    kernel is evaluated as exp(kappa*(cos d - 1)) which cannot overflow even
    for sigma = 1 degree (kappa ~ 3283).
    """
    if not kind.circular:
        raise DomainError("circular_target needs an Azimuth360 or Rotation360 grid")
    return AngleGrid(kind, circular_target_probs(np.array([wrap_azimuth(mu)]), sigma)[0])


def circular_target_probs(mu: np.ndarray, sigma: float) -> np.ndarray:
    """Batched circular targets, shape (len(mu), 360)."""
    kappa = von_mises_concentration(sigma)
    mu = np.asarray(mu, dtype=np.float64)[:, None]
    # offsets reduced into [-180, 180) keep cos() arguments small
    d = np.remainder(np.arange(1, 361, dtype=np.float64) - mu + 180.0, 360.0) - 180.0
    w = np.exp(kappa * (np.cos(np.radians(d)) - 1.0))
    return w / w.sum(axis=1, keepdims=True)


def polar_target_probs(theta: np.ndarray, sigma: float) -> np.ndarray:
    """Batched polar targets, shape (len(theta), 180)."""
    _check_sigma(sigma)
    theta = np.asarray(theta, dtype=np.float64)[:, None]
    logits = -((np.arange(1, 181, dtype=np.float64) - theta) ** 2) / (2.0 * sigma * sigma)
    w = np.exp(logits - logits.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class Decoded:
    angle: float
    degenerate: bool


def decode_argmax(grid: AngleGrid) -> Decoded:
    """Angle of the most probable bin.

    Ties go to the lowest bin. The result is flagged degenerate when the peak
    stands less than 1e-6 above the median bin. Circular grids report bin 360
    as 0.
    """
    if not isinstance(grid, AngleGrid):
        raise DomainError("decode_argmax needs an AngleGrid")
    p = grid.probs
    k = int(np.argmax(p))
    degenerate = bool(p[k] - np.median(p) < 1e-6)
    angle = float(k + 1)
    if grid.kind.circular:
        angle = wrap_azimuth(angle)
    return Decoded(angle, degenerate)


def shift_grid(grid: AngleGrid, k: int) -> AngleGrid:
    """Cyclically move a circular grid ``k`` bins toward larger angles."""
    if not grid.kind.circular:
        raise DomainError("only circular grids can be shifted")
    return AngleGrid(grid.kind, np.roll(grid.probs, k))


def target_for(kind: GridKind, angle: float, sigma: float) -> AngleGrid:
    if kind is GridKind.Polar180:
        return gaussian_polar_target(angle, sigma)
    return circular_target(angle, sigma, kind)


def one_hot(kind: GridKind, angle: float) -> AngleGrid:
    """Grid with all mass in the bin nearest ``angle``."""
    n = kind.size
    if kind.circular:
        b = int(round(wrap_azimuth(angle))) % 360
        b = 360 if b == 0 else b
    else:
        b = min(max(int(round(angle)), 1), 180)
    p = np.zeros(n)
    p[b - 1] = 1.0
    return AngleGrid(kind, p)
