"""One flat run configuration shared by every subcommand.

The file is a flat YAML mapping; keys are the field names below. Command
line flags override file values. Unknown keys and out-of-range values raise
``ConfigError``.

Seeds: every random stream is derived from ``seed`` through a fixed
component tag (dataset objects, dataset views, weight init, batch order), so
the whole run is reproducible from this file alone.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .dataset import DatasetConfig
from .estimator import ArchConfig
from .objective import ObjectiveKind
from .train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    # generation
    objects: int = 200
    views: int = 40
    size: int = 64
    split_mode: str = "object"
    val_fraction: float = 0.1
    no_front_fraction: float = 0.1
    theta_min: float = 30.0
    theta_max: float = 150.0
    delta_min: float = -30.0
    delta_max: float = 30.0
    radius_min: float = 1.8
    radius_max: float = 2.4
    fov: float = 45.0
    # training
    steps: int = 3000
    batch_size: int = 64
    lr_backbone: float = 1e-3
    lr_heads: float = 1e-3
    weight_decay: float = 0.01
    lam: float = 1.0
    sigma_polar: float = 2.0
    sigma_azimuth: float = 20.0
    sigma_rotation: float = 1.0
    objective: str = "fitting"
    crop_augment: bool = True
    crop_prob: float = 0.5
    eval_every: int = 500
    log_every: int = 50
    pool: int = 2
    hidden: str = "256"
    # annotation
    symmetry_threshold: float = 0.85
    prune_symmetric_pair: bool = False
    oracle_timeout: float = 30.0

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.objects >= 1, "objects must be >= 1")
        need(self.views >= 1, "views must be >= 1")
        need(self.size >= 8, "size must be >= 8")
        need(self.split_mode in ("object", "view"), "split_mode must be 'object' or 'view'")
        need(0 <= self.val_fraction < 1, "val_fraction must lie in [0, 1)")
        need(0 <= self.no_front_fraction <= 1, "no_front_fraction must lie in [0, 1]")
        need(0 <= self.theta_min <= self.theta_max <= 180, "need 0 <= theta_min <= theta_max <= 180")
        need(self.delta_min <= self.delta_max and self.delta_max - self.delta_min <= 360, "bad delta range")
        need(0 < self.radius_min <= self.radius_max, "need 0 < radius_min <= radius_max")
        need(0 < self.fov < 180, "fov must lie in (0, 180)")
        need(self.steps >= 0, "steps must be >= 0")
        need(self.batch_size >= 1, "batch_size must be >= 1")
        need(self.lr_backbone > 0 and self.lr_heads > 0, "learning rates must be > 0")
        need(self.weight_decay >= 0, "weight_decay must be >= 0")
        need(self.lam >= 0, "lam must be >= 0")
        need(min(self.sigma_polar, self.sigma_azimuth, self.sigma_rotation) > 0, "sigmas must be > 0")
        need(self.objective in {k.value for k in ObjectiveKind}, "objective must be fitting, classification or regression")
        need(0 <= self.crop_prob <= 1, "crop_prob must lie in [0, 1]")
        need(self.eval_every >= 0 and self.log_every >= 1, "eval_every must be >= 0 and log_every >= 1")
        need(self.pool >= 1 and self.size % self.pool == 0, "pool must divide size")
        try:
            widths = self.hidden_widths()
        except ValueError:
            raise ConfigError(f"hidden must be one or two comma-separated widths, got {self.hidden!r}")
        need(1 <= len(widths) <= 2 and min(widths) >= 1, "hidden must be one or two positive widths")
        need(0 <= self.symmetry_threshold <= 1, "symmetry_threshold must lie in [0, 1]")
        need(self.oracle_timeout > 0, "oracle_timeout must be > 0")
        return self

    def hidden_widths(self) -> tuple:
        return tuple(int(h) for h in str(self.hidden).split(",") if h.strip())

    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig(
            n_objects=self.objects,
            views_per_object=self.views,
            width=self.size,
            height=self.size,
            seed=self.seed,
            radius_range=(self.radius_min, self.radius_max),
            theta_range=(self.theta_min, self.theta_max),
            delta_range=(self.delta_min, self.delta_max),
            vertical_fov=self.fov,
            no_front_fraction=self.no_front_fraction,
            val_fraction=self.val_fraction,
            split_mode=self.split_mode,
        )

    def train_config(self, height: int | None = None, width: int | None = None) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            lr_backbone=self.lr_backbone,
            lr_heads=self.lr_heads,
            weight_decay=self.weight_decay,
            lam=self.lam,
            sigma_polar=self.sigma_polar,
            sigma_azimuth=self.sigma_azimuth,
            sigma_rotation=self.sigma_rotation,
            objective=ObjectiveKind(self.objective),
            seed=self.seed,
            crop_augment=self.crop_augment,
            crop_prob=self.crop_prob,
            eval_every=self.eval_every,
            arch=ArchConfig(height or self.size, width or self.size, self.pool, self.hidden_widths()),
        )

    def as_dict(self) -> dict:
        return asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, value):
    kind = type(getattr(RunConfig, name))
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no", "1", "0"):
            return value.lower() in ("true", "yes", "1")
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    if kind is str:
        if isinstance(value, (list, tuple)):
            return ",".join(str(v) for v in value)
        return str(value)
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected {kind.__name__}, got {value!r}") from None


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a flat key/value mapping")
        for k, v in data.items():
            if k not in _FIELDS:
                raise ConfigError(f"{path}: unknown key {k!r}")
            if isinstance(v, dict):
                raise ConfigError(f"{path}: {k!r} must be a scalar, the config is flat")
            values[k] = _coerce(k, v)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in _FIELDS:
            raise ConfigError(f"unknown setting {k!r}")
        values[k] = _coerce(k, v)
    return RunConfig(**values).validate()
