"""Per-angle error metrics, benchmark files and the results table."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .angles import Direction8, DomainError, Orientation, circular_abs_error, direction8_of, polar_abs_error

AZIMUTH_TOLERANCES = (22.5, 45.0)
POLAR_TOLERANCES = (5.0, 10.0)
ROTATION_TOLERANCES = (5.0, 10.0)


@dataclass
class BenchmarkRecord:
    id: str
    file: str
    orientation: Orientation
    direction8: Direction8 | None = None

    def to_json(self) -> dict:
        o = self.orientation
        d = {
            "id": self.id,
            "file": self.file,
            "has_front": o.has_front,
            "polar": o.polar if o.has_front else None,
            "azimuth": o.azimuth if o.has_front else None,
            "rotation": o.rotation if o.has_front else None,
        }
        if self.direction8 is not None:
            d["direction8"] = self.direction8.name
        return d

    @classmethod
    def from_json(cls, d: dict) -> "BenchmarkRecord":
        if d["has_front"]:
            o = Orientation(float(d["polar"]), float(d["azimuth"]), float(d["rotation"]))
        else:
            o = Orientation.no_front()
        d8 = d.get("direction8")
        return cls(str(d["id"]), d.get("file", ""), o, Direction8[d8] if d8 is not None else None)


def save_benchmark(records: Sequence[BenchmarkRecord], path) -> None:
    Path(path).write_text("".join(json.dumps(r.to_json()) + "\n" for r in records), encoding="utf-8")


def load_benchmark(path) -> list[BenchmarkRecord]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(BenchmarkRecord.from_json(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}: line {lineno}: cannot parse benchmark record: {exc}") from exc
    return out


@dataclass
class AngleStats:
    abs_mean: float
    acc: dict  # tolerance (degrees) -> percentage


@dataclass
class EvalReport:
    azimuth: AngleStats
    polar: AngleStats
    rotation: AngleStats
    judgment_acc: float
    direction8_acc: float
    n: int
    n_angle: int

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("azimuth", "polar", "rotation"):
            d[k]["acc"] = {_tol_key(t): v for t, v in d[k]["acc"].items()}
        return d


def _tol_key(t: float) -> str:
    return f"{t:g}"


def accuracy_at(errors: np.ndarray, tol: float) -> float:
    """Percentage of errors within the tolerance (error <= tol)."""
    if len(errors) == 0:
        return math.nan
    return 100.0 * float(np.mean(errors <= tol))


def _stats(errors: np.ndarray, tols) -> AngleStats:
    return AngleStats(
        abs_mean=float(np.mean(errors)) if len(errors) else math.nan,
        acc={t: accuracy_at(errors, t) for t in tols},
    )


def _align(preds, gts: Sequence[BenchmarkRecord]):
    if isinstance(preds, Mapping):
        ids = [g.id for g in gts]
        if set(preds) != set(ids) or len(set(ids)) != len(ids):
            missing = sorted(set(ids) - set(preds))[:5]
            extra = sorted(set(preds) - set(ids))[:5]
            raise DomainError(f"prediction ids do not match benchmark ids (missing {missing}, unexpected {extra})")
        return [preds[i] for i in ids]
    preds = list(preds)
    if len(preds) != len(gts):
        raise DomainError(f"{len(preds)} predictions for {len(gts)} records")
    return preds


def evaluate(preds, gts: Sequence[BenchmarkRecord]) -> EvalReport:
    """Score predictions against ground truth.

    ``preds`` is a mapping from record id to anything with ``has_front``,
    ``polar``, ``azimuth`` and ``rotation`` attributes, or a sequence aligned
    with ``gts``. Angle metrics use only records where both sides claim a
    front face. Azimuth and rotation errors are circular, polar is linear.
    """
    gts = list(gts)
    if not gts:
        raise DomainError("cannot evaluate an empty benchmark")
    preds = _align(preds, gts)
    azi, pol, rot, d8_hits = [], [], [], []
    judged = 0
    for p, g in zip(preds, gts):
        go = g.orientation
        judged += bool(p.has_front) == bool(go.has_front)
        if not (p.has_front and go.has_front):
            continue
        azi.append(circular_abs_error(p.azimuth, go.azimuth))
        pol.append(polar_abs_error(p.polar, go.polar))
        rot.append(circular_abs_error(p.rotation, go.rotation))
        want = g.direction8 if g.direction8 is not None else direction8_of(go.azimuth)
        d8_hits.append(direction8_of(p.azimuth) == want)
    return EvalReport(
        azimuth=_stats(np.array(azi), AZIMUTH_TOLERANCES),
        polar=_stats(np.array(pol), POLAR_TOLERANCES),
        rotation=_stats(np.array(rot), ROTATION_TOLERANCES),
        judgment_acc=100.0 * judged / len(gts),
        direction8_acc=100.0 * float(np.mean(d8_hits)) if d8_hits else math.nan,
        n=len(gts),
        n_angle=len(azi),
    )


def direction8_accuracy(preds, gts: Sequence[BenchmarkRecord]) -> float:
    gts = list(gts)
    if not gts:
        raise DomainError("no records")
    missing = [g.id for g in gts if g.direction8 is None]
    if missing:
        raise DomainError(f"records without a direction8 label: {missing[:5]}")
    preds = _align(preds, gts)
    hits = sum(direction8_of(p.azimuth) == g.direction8 for p, g in zip(preds, gts))
    return 100.0 * hits / len(gts)


_GROUPS = (
    ("Azimuth", "azimuth", ("Abs↓", "Acc@22.5°↑", "Acc@45°↑"), AZIMUTH_TOLERANCES),
    ("Polar", "polar", ("Abs↓", "Acc@5°↑", "Acc@10°↑"), POLAR_TOLERANCES),
    ("Rotation", "rotation", ("Abs↓", "Acc@5°↑", "Acc@10°↑"), ROTATION_TOLERANCES),
)
_W = 11


def _cell(v: float) -> str:
    return f"{v:>{_W}.2f}"


def render_report(report: EvalReport, label: str = "") -> str:
    """Fixed-width text table: Azimuth, Polar, Rotation groups of three columns."""
    name_w = max(8, len(label))
    group_w = 3 * _W + 2
    top = " " * name_w + " | " + " | ".join(f"{g:^{group_w}}" for g, *_ in _GROUPS)
    sub = f"{'Method':<{name_w}}" + " | " + " | ".join(
        " ".join(f"{h:>{_W}}" for h in heads) for _, _, heads, _ in _GROUPS
    )
    cells = []
    for _, key, _, tols in _GROUPS:
        s: AngleStats = getattr(report, key)
        cells.append(" ".join([_cell(s.abs_mean)] + [_cell(s.acc[t]) for t in tols]))
    row = f"{label:<{name_w}}" + " | " + " | ".join(cells)
    rule = "-" * len(sub)
    tail = (
        f"Judgment Acc: {report.judgment_acc:.2f}   Direction-8 Acc: {report.direction8_acc:.2f}   "
        f"n = {report.n} (angles scored on {report.n_angle})"
    )
    return "\n".join([top, sub, rule, row, rule, tail]) + "\n"
