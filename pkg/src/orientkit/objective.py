"""Gated composite loss over the four prediction heads, with analytic gradients.

The heads are kept as one flat logit vector of length 901 in the order
polar (180), azimuth (360), rotation (360), confidence (1). Everything here
is batched: a batch is a ``(B, 901)`` array plus label arrays of length B.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .angles import DomainError, Orientation
from .distributions import circular_target_probs, polar_target_probs

N_POLAR, N_AZIMUTH, N_ROTATION = 180, 360, 360
POLAR = slice(0, 180)
AZIMUTH = slice(180, 540)
ROTATION = slice(540, 900)
CONFIDENCE = 900
N_LOGITS = 901

PROB_FLOOR = 1e-12


class ObjectiveKind(enum.Enum):
    DistributionFitting = "fitting"
    OneHotClassification = "classification"
    DirectRegression = "regression"


@dataclass(frozen=True)
class HeadLogits:
    polar_logits: np.ndarray
    azimuth_logits: np.ndarray
    rotation_logits: np.ndarray
    confidence_logit: float

    def __post_init__(self):
        for name, n in (("polar_logits", 180), ("azimuth_logits", 360), ("rotation_logits", 360)):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (n,):
                raise DomainError(f"{name} must have shape ({n},), got {v.shape}")
            if not np.all(np.isfinite(v)):
                raise DomainError(f"{name} contains non-finite values")
            object.__setattr__(self, name, v)
        z = float(self.confidence_logit)
        if not math.isfinite(z):
            raise DomainError("confidence_logit is not finite")
        object.__setattr__(self, "confidence_logit", z)

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [self.polar_logits, self.azimuth_logits, self.rotation_logits, [self.confidence_logit]]
        )

    @classmethod
    def from_flat(cls, v: np.ndarray) -> "HeadLogits":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (N_LOGITS,):
            raise DomainError(f"expected {N_LOGITS} logits, got shape {v.shape}")
        return cls(v[POLAR], v[AZIMUTH], v[ROTATION], v[CONFIDENCE])


@dataclass(frozen=True)
class LossBreakdown:
    l_pol: float
    l_azi: float
    l_rot: float
    l_c: float
    total: float

    def as_dict(self) -> dict:
        return {"l_pol": self.l_pol, "l_azi": self.l_azi, "l_rot": self.l_rot, "l_c": self.l_c, "total": self.total}


@dataclass(frozen=True)
class ObjectiveConfig:
    lam: float = 1.0
    sigma_polar: float = 2.0
    sigma_azimuth: float = 20.0
    sigma_rotation: float = 1.0
    kind: ObjectiveKind = ObjectiveKind.DistributionFitting

    def __post_init__(self):
        if not isinstance(self.kind, ObjectiveKind):
            raise DomainError(f"unknown objective kind {self.kind!r}")
        for name in ("sigma_polar", "sigma_azimuth", "sigma_rotation"):
            s = getattr(self, name)
            if not (math.isfinite(s) and s > 0):
                raise DomainError(f"{name} must be > 0, got {s!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"lam must be >= 0, got {self.lam!r}")


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError("logits must be finite")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    _check_finite(z)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(pred: np.ndarray, target: np.ndarray) -> np.ndarray | float:
    """-sum(target * log(pred)) along the last axis, pred floored at 1e-12."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DomainError(f"length mismatch: pred {pred.shape} vs target {target.shape}")
    out = -(target * np.log(np.maximum(pred, PROB_FLOOR))).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def bce(confidence_logit, c):
    """Binary cross-entropy on a logit, in the overflow-free form."""
    z = np.asarray(confidence_logit, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    out = np.maximum(z, 0.0) - z * c + np.log1p(np.exp(-np.abs(z)))
    return float(out) if out.ndim == 0 else out


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _one_hot_rows(bins: np.ndarray, n: int) -> np.ndarray:
    t = np.zeros((len(bins), n))
    t[np.arange(len(bins)), bins - 1] = 1.0
    return t


def label_bins(angles: np.ndarray, n: int) -> np.ndarray:
    """Nearest 1-based bin; on circular grids heading 0 lands in bin 360."""
    b = np.rint(np.asarray(angles, dtype=np.float64)).astype(np.int64)
    if n == 180:
        return np.clip(b, 1, 180)
    b = np.mod(b, 360)
    return np.where(b == 0, 360, b)


def angle_targets(polar, azimuth, rotation, cfg: ObjectiveConfig):
    """Per-sample target distributions for the three angle heads."""
    if cfg.kind is ObjectiveKind.DistributionFitting:
        return (
            polar_target_probs(polar, cfg.sigma_polar),
            circular_target_probs(azimuth, cfg.sigma_azimuth),
            circular_target_probs(rotation, cfg.sigma_rotation),
        )
    return (
        _one_hot_rows(label_bins(polar, 180), 180),
        _one_hot_rows(label_bins(azimuth, 360), 360),
        _one_hot_rows(label_bins(rotation, 360), 360),
    )


@dataclass
class BatchLabels:
    polar: np.ndarray
    azimuth: np.ndarray
    rotation: np.ndarray
    has_front: np.ndarray

    @classmethod
    def from_orientations(cls, labels) -> "BatchLabels":
        labels = list(labels)
        return cls(
            polar=np.array([o.polar if o.has_front else 90.0 for o in labels], dtype=np.float64),
            azimuth=np.array([o.azimuth if o.has_front else 0.0 for o in labels], dtype=np.float64),
            rotation=np.array([o.rotation if o.has_front else 0.0 for o in labels], dtype=np.float64),
            has_front=np.array([o.has_front for o in labels], dtype=bool),
        )


def batch_loss_and_grad(logits: np.ndarray, labels: BatchLabels, cfg: ObjectiveConfig):
    """Per-sample loss terms and the gradient of their batch mean.

    Returns ``(terms, grad)`` where ``terms`` maps l_pol/l_azi/l_rot/l_c/total
    to arrays of shape (B,) and ``grad`` has the shape of ``logits``.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != N_LOGITS:
        raise DomainError(f"expected logits of shape (B, {N_LOGITS}), got {z.shape}")
    _check_finite(z)
    B = z.shape[0]
    gate = labels.has_front.astype(np.float64)
    grad = np.zeros_like(z)
    terms = {}

    if cfg.kind is ObjectiveKind.DirectRegression:
        for name, sl, ang in (
            ("l_pol", POLAR, labels.polar),
            ("l_azi", AZIMUTH, labels.azimuth),
            ("l_rot", ROTATION, labels.rotation),
        ):
            r = z[:, sl.start] - ang
            terms[name] = gate * r * r
            grad[:, sl.start] = gate * 2.0 * r
    else:
        targets = angle_targets(labels.polar, labels.azimuth, labels.rotation, cfg)
        for name, sl, t in zip(("l_pol", "l_azi", "l_rot"), (POLAR, AZIMUTH, ROTATION), targets):
            p = softmax(z[:, sl])
            terms[name] = gate * cross_entropy(p, t)
            grad[:, sl] = gate[:, None] * (p - t)

    zc = z[:, CONFIDENCE]
    terms["l_c"] = np.atleast_1d(bce(zc, gate))
    grad[:, CONFIDENCE] = cfg.lam * (sigmoid(zc) - gate)
    terms["total"] = terms["l_pol"] + terms["l_azi"] + terms["l_rot"] + cfg.lam * terms["l_c"]
    return terms, grad / B


def combined_loss(heads: HeadLogits, label: Orientation, cfg: ObjectiveConfig = ObjectiveConfig()) -> LossBreakdown:
    terms, _ = batch_loss_and_grad(heads.flat()[None, :], BatchLabels.from_orientations([label]), cfg)
    return LossBreakdown(**{k: float(v[0]) for k, v in terms.items()})


def loss_gradients(heads: HeadLogits, label: Orientation, cfg: ObjectiveConfig = ObjectiveConfig()) -> HeadLogits:
    """Gradient of ``combined_loss(...).total`` with respect to every logit."""
    _, g = batch_loss_and_grad(heads.flat()[None, :], BatchLabels.from_orientations([label]), cfg)
    return HeadLogits.from_flat(g[0])


def mean_breakdown(terms: dict) -> LossBreakdown:
    return LossBreakdown(**{k: float(np.mean(v)) for k, v in terms.items()})
