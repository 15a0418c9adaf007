"""A small fully-connected orientation estimator with four linear heads.

Images are turned into features by average-pooling RGB plus a grey channel;
one or two rectifier layers feed the polar (180), azimuth (360), rotation
(360) and confidence (1) heads. Parameters are float32 in memory and on disk.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .angles import DomainError, wrap_azimuth
from .distributions import AngleGrid, GridKind, decode_argmax, one_hot
from .objective import POLAR, AZIMUTH, ROTATION, CONFIDENCE, ObjectiveKind, softmax, sigmoid

HEADS = (("polar", 180), ("azimuth", 360), ("rotation", 360), ("confidence", 1))
CHECKPOINT_MAGIC = b"ORIENTKIT\x00CKPT"
CHECKPOINT_VERSION = 1
CONFIDENCE_THRESHOLD = 0.5


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    height: int = 48
    width: int = 48
    pool: int = 2
    hidden: tuple = (256,)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.pool < 1 or self.height % self.pool or self.width % self.pool:
            raise ConfigError(f"pool {self.pool} must divide the image size {self.height}x{self.width}")
        if not (1 <= len(self.hidden) <= 2) or min(self.hidden) < 1:
            raise ConfigError(f"need one or two positive hidden widths, got {self.hidden}")

    @property
    def n_features(self) -> int:
        return (self.height // self.pool) * (self.width // self.pool) * 4


@dataclass
class ModelParams:
    arch: ArchConfig
    tensors: dict  # name -> ndarray, in declaration order
    objective: ObjectiveKind = ObjectiveKind.DistributionFitting
    version: int = CHECKPOINT_VERSION

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.arch, {k: v.astype(dtype) for k, v in self.tensors.items()}, self.objective)

    def copy(self) -> "ModelParams":
        return self.astype(next(iter(self.tensors.values())).dtype)

    @property
    def n_hidden(self) -> int:
        return len(self.arch.hidden)


def layer_names(arch: ArchConfig) -> list[str]:
    names = [f"hidden{i}" for i in range(len(arch.hidden))]
    return names + [h for h, _ in HEADS]


def init_model(arch: ArchConfig, seed: int = 0, objective: ObjectiveKind = ObjectiveKind.DistributionFitting) -> ModelParams:
    """Uniform fan-in initialisation; all biases start at zero."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) % (1 << 63), 7]))
    tensors = {}
    fan_in = arch.n_features
    for i, width in enumerate(arch.hidden):
        bound = math.sqrt(6.0 / fan_in)
        tensors[f"hidden{i}.W"] = rng.uniform(-bound, bound, size=(fan_in, width)).astype(np.float32)
        tensors[f"hidden{i}.b"] = np.zeros(width, dtype=np.float32)
        fan_in = width
    for name, n in HEADS:
        bound = 1.0 / math.sqrt(fan_in)
        tensors[f"{name}.W"] = rng.uniform(-bound, bound, size=(fan_in, n)).astype(np.float32)
        tensors[f"{name}.b"] = np.zeros(n, dtype=np.float32)
    return ModelParams(arch, tensors, objective)


def features(images: np.ndarray, arch: ArchConfig, dtype=np.float32) -> np.ndarray:
    """(B, H, W, 3) uint8 -> (B, n_features) pooled RGB+grey in [0, 1]."""
    x = np.asarray(images)
    if x.ndim == 3:
        x = x[None]
    if x.shape[1:] != (arch.height, arch.width, 3):
        raise DomainError(f"expected images of shape ({arch.height}, {arch.width}, 3), got {x.shape[1:]}")
    x = x.astype(dtype) / dtype(255.0)
    grey = (x[..., 0:1] * dtype(0.299) + x[..., 1:2] * dtype(0.587) + x[..., 2:3] * dtype(0.114)).astype(dtype)
    x = np.concatenate([x, grey], axis=-1)
    p = arch.pool
    if p > 1:
        B, H, W, C = x.shape
        x = x.reshape(B, H // p, p, W // p, p, C).mean(axis=(2, 4), dtype=dtype)
    return x.reshape(x.shape[0], -1)


def forward_features(params: ModelParams, x: np.ndarray, keep_cache: bool = False):
    """Logits of shape (B, 901) for a feature batch; optionally the activations for backprop."""
    t = params.tensors
    acts = [x]
    h = x
    for i in range(params.n_hidden):
        h = np.maximum(h @ t[f"hidden{i}.W"] + t[f"hidden{i}.b"], 0)
        acts.append(h)
    logits = np.concatenate([h @ t[f"{name}.W"] + t[f"{name}.b"] for name, _ in HEADS], axis=1)
    return (logits, acts) if keep_cache else logits


def forward(params: ModelParams, images: np.ndarray) -> np.ndarray:
    x = features(images, params.arch, next(iter(params.tensors.values())).dtype.type)
    return forward_features(params, x)


_HEAD_SLICES = {"polar": POLAR, "azimuth": AZIMUTH, "rotation": ROTATION, "confidence": slice(CONFIDENCE, CONFIDENCE + 1)}


def backward(params: ModelParams, acts: list, grad_logits: np.ndarray, active_heads=None) -> dict:
    """Parameter gradients given dLoss/dlogits.

    Heads not listed in ``active_heads`` get ``None`` (no loss reached them
    in this batch) so the optimiser leaves them untouched.
    """
    t = params.tensors
    dtype = acts[-1].dtype
    g = grad_logits.astype(dtype, copy=False)
    h = acts[-1]
    grads = {}
    dh = np.zeros_like(h)
    for name, _ in HEADS:
        if active_heads is not None and name not in active_heads:
            grads[f"{name}.W"] = grads[f"{name}.b"] = None
            continue
        gs = g[:, _HEAD_SLICES[name]]
        grads[f"{name}.W"] = h.T @ gs
        grads[f"{name}.b"] = gs.sum(axis=0)
        dh += gs @ t[f"{name}.W"].T
    for i in reversed(range(params.n_hidden)):
        dz = dh * (acts[i + 1] > 0)
        grads[f"hidden{i}.W"] = acts[i].T @ dz
        grads[f"hidden{i}.b"] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ t[f"hidden{i}.W"].T
    return grads


@dataclass
class OrientationEstimate:
    has_front: bool
    confidence: float
    polar: float | None = None
    azimuth: float | None = None
    rotation: float | None = None
    grids: dict = field(default_factory=dict, repr=False)


def apply_mask(images: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return images
    m = np.asarray(mask).astype(bool)
    if m.shape != images.shape[-3:-1]:
        raise DomainError(f"mask shape {m.shape} does not match image {images.shape[-3:-1]}")
    return images * m[..., None].astype(images.dtype)


def _regression_grids(z: np.ndarray):
    pol = float(np.clip(z[POLAR.start], 1.0, 180.0))
    return {
        "polar": one_hot(GridKind.Polar180, pol),
        "azimuth": one_hot(GridKind.Azimuth360, wrap_azimuth(float(z[AZIMUTH.start]))),
        "rotation": one_hot(GridKind.Rotation360, wrap_azimuth(float(z[ROTATION.start]))),
    }


def estimate_from_logits(z: np.ndarray, objective: ObjectiveKind) -> OrientationEstimate:
    z = np.asarray(z, dtype=np.float64)
    conf = float(sigmoid(np.array([z[CONFIDENCE]]))[0])
    if objective is ObjectiveKind.DirectRegression:
        grids = _regression_grids(z)
    else:
        grids = {
            "polar": AngleGrid(GridKind.Polar180, softmax(z[POLAR])),
            "azimuth": AngleGrid(GridKind.Azimuth360, softmax(z[AZIMUTH])),
            "rotation": AngleGrid(GridKind.Rotation360, softmax(z[ROTATION])),
        }
    if conf < CONFIDENCE_THRESHOLD:
        return OrientationEstimate(False, conf, grids=grids)
    return OrientationEstimate(
        True,
        conf,
        decode_argmax(grids["polar"]).angle,
        decode_argmax(grids["azimuth"]).angle,
        decode_argmax(grids["rotation"]).angle,
        grids,
    )


def predict(params: ModelParams, image: np.ndarray, mask: np.ndarray | None = None) -> OrientationEstimate:
    img = apply_mask(np.asarray(image), mask)
    z = forward(params, img[None])[0]
    return estimate_from_logits(z, params.objective)


def predict_angles(params: ModelParams, images: np.ndarray, batch: int = 256):
    """Vectorised decode for many images: dict of arrays has_front/polar/azimuth/rotation/confidence."""
    out = {k: [] for k in ("has_front", "polar", "azimuth", "rotation", "confidence")}
    for s in range(0, len(images), batch):
        z = forward(params, images[s : s + batch]).astype(np.float64)
        conf = sigmoid(z[:, CONFIDENCE])
        if params.objective is ObjectiveKind.DirectRegression:
            pol = np.rint(np.clip(z[:, POLAR.start], 1.0, 180.0))
            azi = np.mod(np.rint(np.mod(z[:, AZIMUTH.start], 360.0)), 360.0)
            rot = np.mod(np.rint(np.mod(z[:, ROTATION.start], 360.0)), 360.0)
        else:
            pol = np.argmax(z[:, POLAR], axis=1) + 1.0
            azi = np.mod(np.argmax(z[:, AZIMUTH], axis=1) + 1.0, 360.0)
            rot = np.mod(np.argmax(z[:, ROTATION], axis=1) + 1.0, 360.0)
        out["has_front"].append(conf >= CONFIDENCE_THRESHOLD)
        out["polar"].append(pol)
        out["azimuth"].append(azi)
        out["rotation"].append(rot)
        out["confidence"].append(conf)
    return {k: np.concatenate(v) for k, v in out.items()}


def crop_resize(image: np.ndarray, frac: float, top: int, left: int) -> np.ndarray:
    """Take a window covering ``frac`` of the area at (top, left), nearest-neighbour back to full size."""
    H, W = image.shape[:2]
    s = math.sqrt(frac)
    ch = max(1, min(H, int(round(H * s))))
    cw = max(1, min(W, int(round(W * s))))
    top = min(max(top, 0), H - ch)
    left = min(max(left, 0), W - cw)
    rows = top + (np.arange(H) * ch) // H
    cols = left + (np.arange(W) * cw) // W
    return image[rows[:, None], cols[None, :]]


def augment_random_crop(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    H, W = image.shape[:2]
    if H < 8 or W < 8:
        raise DomainError("random crop needs an image of at least 8x8")
    frac = rng.uniform(0.5, 1.0)
    s = math.sqrt(frac)
    ch, cw = int(round(H * s)), int(round(W * s))
    top = int(rng.integers(0, H - ch + 1))
    left = int(rng.integers(0, W - cw + 1))
    return crop_resize(image, frac, top, left)


def save_checkpoint(params: ModelParams, path) -> None:
    header = {
        "arch": asdict(params.arch),
        "objective": params.objective.value,
        "tensors": [[k, list(v.shape)] for k, v in params.tensors.items()],
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(hb)), hb]
    for v in params.tensors.values():
        chunks.append(np.ascontiguousarray(v, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> ModelParams:
    data = Path(path).read_bytes()
    n = len(CHECKPOINT_MAGIC)
    if data[:n] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not an orientkit checkpoint")
    version, hlen = struct.unpack_from("<II", data, n)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint format version {version} is not supported (expected {CHECKPOINT_VERSION})")
    pos = n + 8
    header = json.loads(data[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    arch = ArchConfig(**header["arch"])
    tensors = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(shape)
        tensors[name] = arr.astype(np.float32)
        pos += 4 * count
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    expected = init_model(arch).tensors
    if [(k, v.shape) for k, v in expected.items()] != [(k, v.shape) for k, v in tensors.items()]:
        raise CheckpointError(f"{path}: tensor layout does not match architecture {arch}")
    return ModelParams(arch, tensors, ObjectiveKind(header["objective"]), version)

