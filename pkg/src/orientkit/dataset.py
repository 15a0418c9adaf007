"""Labelled multi-view dataset generation and manifest I/O."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .angles import DomainError, Orientation, wrap_azimuth
from .render import camera_from_orientation, make_arrow_object, make_symmetric_object, rasterize, read_ppm, write_ppm

MANIFEST_NAME = "manifest.jsonl"


@dataclass
class DatasetConfig:
    n_objects: int = 10
    views_per_object: int = 40
    width: int = 64
    height: int = 64
    seed: int = 0
    radius_range: tuple = (1.8, 2.4)
    theta_range: tuple = (30.0, 150.0)
    delta_range: tuple = (-30.0, 30.0)
    vertical_fov: float = 45.0
    no_front_fraction: float = 0.1
    val_fraction: float = 0.1
    split_mode: str = "object"  # "object": last ids held out; "view": last views of every object

    def validate(self) -> None:
        if self.n_objects < 1 or self.views_per_object < 1:
            raise DomainError("n_objects and views_per_object must be >= 1")
        if self.width < 8 or self.height < 8:
            raise DomainError("images must be at least 8x8")
        lo, hi = self.radius_range
        if not (0 < lo <= hi):
            raise DomainError(f"bad radius range {self.radius_range}")
        lo, hi = self.theta_range
        if not (0 <= lo <= hi <= 180):
            raise DomainError(f"bad theta range {self.theta_range}")
        lo, hi = self.delta_range
        if not (lo <= hi and hi - lo <= 360):
            raise DomainError(f"bad delta range {self.delta_range}")
        if not (0 <= self.no_front_fraction <= 1) or not (0 <= self.val_fraction < 1):
            raise DomainError("fractions must lie in [0, 1)")
        if self.split_mode not in ("object", "view"):
            raise DomainError(f"split_mode must be 'object' or 'view', got {self.split_mode!r}")


@dataclass
class LabeledView:
    object_id: int
    view: int
    file: str
    orientation: Orientation
    split: str = "train"
    camera: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        o = self.orientation
        return {
            "object_id": self.object_id,
            "view": self.view,
            "file": self.file,
            "polar": o.polar if o.has_front else None,
            "azimuth": o.azimuth if o.has_front else None,
            "rotation": o.rotation if o.has_front else None,
            "has_front": o.has_front,
            "split": self.split,
        }

    @classmethod
    def from_json(cls, d: dict) -> "LabeledView":
        if d["has_front"]:
            o = Orientation(d["polar"], d["azimuth"], d["rotation"], True)
        else:
            o = Orientation.no_front()
        return cls(int(d["object_id"]), int(d["view"]), d["file"], o, d.get("split", "train"))


def object_has_front(cfg: DatasetConfig, object_id: int) -> bool:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0, object_id]))
    return bool(rng.uniform() >= cfg.no_front_fraction)


def _n_held_out(total: int, fraction: float) -> int:
    if total < 2 or fraction == 0:
        return 0
    return max(1, int(round(fraction * total)))


def split_of(cfg: DatasetConfig, object_id: int, view: int) -> str:
    if cfg.split_mode == "object":
        k = _n_held_out(cfg.n_objects, cfg.val_fraction)
        return "val" if object_id >= cfg.n_objects - k else "train"
    k = _n_held_out(cfg.views_per_object, cfg.val_fraction)
    return "val" if view >= cfg.views_per_object - k else "train"


def sample_view(cfg: DatasetConfig, object_id: int, view: int) -> dict:
    """Camera parameters for one view, a pure function of (seed, object, view)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, object_id, view]))
    phi = rng.uniform(0.0, 360.0)
    theta = rng.uniform(*cfg.theta_range)
    delta = rng.uniform(*cfg.delta_range)
    radius = rng.uniform(*cfg.radius_range)
    # labels are stored rounded, so render from the rounded values
    return {
        "polar": round(theta, 3),
        "azimuth": wrap_azimuth(round(phi, 3)),
        "rotation": wrap_azimuth(round(delta, 3)),
        "radius": round(radius, 3),
    }


def render_view(cfg: DatasetConfig, object_id: int, view: int):
    cam = sample_view(cfg, object_id, view)
    front = object_has_front(cfg, object_id)
    mesh = make_arrow_object(cfg.seed * 1_000_003 + object_id) if front else make_symmetric_object(
        cfg.seed * 1_000_003 + object_id
    )
    pose = camera_from_orientation(cam["polar"], cam["azimuth"], cam["rotation"], cam["radius"], cfg.vertical_fov)
    img = rasterize(mesh, pose, cfg.width, cfg.height)
    o = Orientation(cam["polar"], cam["azimuth"], cam["rotation"]) if front else Orientation.no_front()
    return img, o, cam


def generate_dataset(cfg: DatasetConfig, out_dir) -> list[LabeledView]:
    """Render every (object, view) pair and write images plus a JSONL manifest."""
    cfg.validate()
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {out}: {exc}") from exc
    records = []
    for oid in range(cfg.n_objects):
        for v in range(cfg.views_per_object):
            img, o, cam = render_view(cfg, oid, v)
            rel = f"images/obj{oid:05d}_v{v:03d}.ppm"
            write_ppm(out / rel, img)
            records.append(LabeledView(oid, v, rel, o, split_of(cfg, oid, v), cam))
    write_manifest(records, out / MANIFEST_NAME)
    return records


def write_manifest(records, path) -> None:
    lines = [json.dumps(r.to_json()) for r in records]
    Path(path).write_text("".join(line + "\n" for line in lines))


def load_manifest(path) -> list[LabeledView]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(LabeledView.from_json(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed manifest record ({exc})") from exc
    return records


def load_images(root, records) -> np.ndarray:
    root = Path(root)
    if root.is_file():
        root = root.parent
    return np.stack([read_ppm(root / r.file) for r in records])


def dataset_arrays(root, records):
    """Images and label arrays for a list of records, in record order."""
    imgs = load_images(root, records)
    polar = np.array([r.orientation.polar if r.orientation.has_front else 90.0 for r in records])
    azimuth = np.array([r.orientation.azimuth if r.orientation.has_front else 0.0 for r in records])
    rotation = np.array([r.orientation.rotation if r.orientation.has_front else 0.0 for r in records])
    has_front = np.array([r.orientation.has_front for r in records], dtype=bool)
    return imgs, polar, azimuth, rotation, has_front


def manifest_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
