"""Mini-batch training of the estimator under any of the three objectives."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .angles import DomainError, Orientation
from .dataset import dataset_arrays, load_manifest
from .estimator import (
    ArchConfig,
    ModelParams,
    augment_random_crop,
    backward,
    features,
    forward_features,
    init_model,
    predict_angles,
)
from .evaluation import BenchmarkRecord, EvalReport, evaluate
from .objective import BatchLabels, ObjectiveConfig, ObjectiveKind, batch_loss_and_grad, mean_breakdown
from .optim import AdamW

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    steps: int = 3000
    batch_size: int = 64
    lr_backbone: float = 1e-3
    lr_heads: float = 1e-3
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    lam: float = 1.0
    sigma_polar: float = 2.0
    sigma_azimuth: float = 20.0
    sigma_rotation: float = 1.0
    objective: ObjectiveKind = ObjectiveKind.DistributionFitting
    seed: int = 0
    crop_augment: bool = True
    crop_prob: float = 0.5
    eval_every: int = 500
    arch: ArchConfig = field(default_factory=ArchConfig)

    def __post_init__(self):
        if isinstance(self.objective, str):
            self.objective = ObjectiveKind(self.objective)
        if isinstance(self.arch, dict):
            self.arch = ArchConfig(**self.arch)
        if self.steps < 0 or self.batch_size < 1:
            raise DomainError("steps must be >= 0 and batch_size >= 1")
        if self.lr_backbone <= 0 or self.lr_heads <= 0:
            raise DomainError("learning rates must be positive")
        if not (0.0 <= self.crop_prob <= 1.0):
            raise DomainError("crop_prob must lie in [0, 1]")

    def objective_config(self) -> ObjectiveConfig:
        return ObjectiveConfig(self.lam, self.sigma_polar, self.sigma_azimuth, self.sigma_rotation, self.objective)


@dataclass
class TrainData:
    images: np.ndarray  # (N, H, W, 3) uint8
    labels: BatchLabels

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, idx) -> "TrainData":
        lab = self.labels
        return TrainData(
            self.images[idx],
            BatchLabels(lab.polar[idx], lab.azimuth[idx], lab.rotation[idx], lab.has_front[idx]),
        )

    def benchmark(self) -> list[BenchmarkRecord]:
        lab = self.labels
        out = []
        for i in range(len(self)):
            o = (
                Orientation(lab.polar[i], lab.azimuth[i], lab.rotation[i])
                if lab.has_front[i]
                else Orientation.no_front()
            )
            out.append(BenchmarkRecord(str(i), "", o))
        return out


def load_split(manifest_path, split: str) -> TrainData:
    records = [r for r in load_manifest(manifest_path) if r.split == split]
    if not records:
        return TrainData(np.zeros((0, 8, 8, 3), np.uint8), BatchLabels(*(np.zeros(0),) * 3, np.zeros(0, bool)))
    root = Path(manifest_path)
    imgs, pol, azi, rot, hf = dataset_arrays(root if root.is_dir() else root.parent, records)
    return TrainData(imgs, BatchLabels(pol, azi, rot, hf))


@dataclass
class TrainResult:
    params: ModelParams
    history: list = field(default_factory=list)  # one dict per step
    evals: list = field(default_factory=list)  # (step, EvalReport)


def validation_report(params: ModelParams, data: TrainData) -> EvalReport:
    pred = predict_angles(params, data.images)
    preds = [
        Orientation(pred["polar"][i], pred["azimuth"][i], pred["rotation"][i])
        if pred["has_front"][i]
        else Orientation.no_front()
        for i in range(len(data))
    ]
    return evaluate(preds, data.benchmark())


def _prepare_batch(data: TrainData, idx, cfg: TrainConfig, rng) -> np.ndarray:
    imgs = data.images[idx]
    if cfg.crop_augment:
        imgs = imgs.copy()
        for k in range(len(imgs)):
            if rng.uniform() < cfg.crop_prob:
                imgs[k] = augment_random_crop(imgs[k], rng)
    return imgs


def train_step(params, opt, data: TrainData, idx, cfg: TrainConfig, ocfg: ObjectiveConfig, rng):
    imgs = _prepare_batch(data, idx, cfg, rng)
    lab = data.labels
    labels = BatchLabels(lab.polar[idx], lab.azimuth[idx], lab.rotation[idx], lab.has_front[idx])
    x = features(imgs, params.arch)
    logits, acts = forward_features(params, x, keep_cache=True)
    terms, grad = batch_loss_and_grad(logits, labels, ocfg)
    # with no front-facing sample in the batch the angle heads receive no loss at all
    active = None if labels.has_front.any() else {"confidence"}
    grads = backward(params, acts, grad, active_heads=active)
    opt.step(params.tensors, grads)
    return mean_breakdown(terms)


def make_optimizer(cfg: TrainConfig, params: ModelParams) -> AdamW:
    def rate(name: str) -> float:
        return cfg.lr_backbone if name.startswith("hidden") else cfg.lr_heads

    return AdamW(lr=rate, betas=tuple(cfg.betas), eps=cfg.eps, weight_decay=cfg.weight_decay)


def train(cfg: TrainConfig, data: TrainData, val: TrainData | None = None, params: ModelParams | None = None,
          callback=None) -> TrainResult:
    """Run ``cfg.steps`` AdamW updates.

    ``callback(step, breakdown, report_or_None)`` is called after every step.
    """
    if len(data) == 0:
        raise DomainError("training split is empty")
    if params is None:
        params = init_model(cfg.arch, cfg.seed, cfg.objective)
    params.objective = cfg.objective
    ocfg = cfg.objective_config()
    opt = make_optimizer(cfg, params)
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed) % (1 << 63), 2]))
    result = TrainResult(params)
    n = len(data)
    for step in range(1, cfg.steps + 1):
        idx = rng.integers(0, n, size=cfg.batch_size) if cfg.batch_size < n else np.arange(n)
        br = train_step(params, opt, data, idx, cfg, ocfg, rng)
        result.history.append({"step": step, **br.as_dict()})
        report = None
        if val is not None and len(val) and cfg.eval_every and step % cfg.eval_every == 0:
            report = validation_report(params, val)
            result.evals.append((step, report))
            log.info("step %d loss %.4f val azimuth acc@22.5 %.2f", step, br.total, report.azimuth.acc[22.5])
        if callback is not None:
            callback(step, br, report)
    return result


def train_from_manifest(cfg: TrainConfig, manifest_path, callback=None) -> TrainResult:
    data = load_split(manifest_path, "train")
    val = load_split(manifest_path, "val")
    if len(data) == 0:
        raise DomainError(f"{manifest_path} has no training records")
    h, w = data.images.shape[1:3]
    if (cfg.arch.height, cfg.arch.width) != (h, w):
        cfg.arch = ArchConfig(h, w, cfg.arch.pool, cfg.arch.hidden)
    return train(cfg, data, val if len(val) else None, callback=callback)
