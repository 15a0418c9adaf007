"""``orientkit`` command line: gen, train, eval, predict, annotate, describe, vote, ablate.

Exit codes: 0 success, 1 runtime or data error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import estimator
from .angles import DomainError, Orientation, direction8_of
from .annotate import VIEW_NAMES, AnnotateConfig, OrthoViewSet, annotate_front, is_canonical
from .config import ConfigError, RunConfig, load_config
from .dataset import generate_dataset, load_manifest
from .evaluation import BenchmarkRecord, evaluate, load_benchmark, render_report
from .objective import ObjectiveKind
from .oracle import AnnotationError, HttpOracle, ScriptedOracle
from .render import read_ppm
from .spatial import AmbiguousOrderError, PlacedObject, ViewObservation, describe_direction, describe_relation, vote_orientation
from .train import load_split, train, train_from_manifest, validation_report

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class CliError(RuntimeError):
    """Runtime failure with a message meant for the user."""


def _json_safe(x):
    if isinstance(x, float):
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def _dumps(obj, **kw) -> str:
    return json.dumps(_json_safe(obj), allow_nan=False, **kw)


def _emit(obj, out: str | None) -> None:
    text = _dumps(obj, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read_json(path: str):
    try:
        raw = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError(f"input file not found: {path}")
    try:
        return json.loads(raw)
    except ValueError as exc:
        raise CliError(f"{path}: not valid JSON: {exc}")


def _config(args, **overrides) -> RunConfig:
    overrides["seed"] = args.seed
    return load_config(args.config, overrides)


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    cfg = _config(
        args,
        objects=args.objects,
        views=args.views,
        size=args.size,
        split_mode=args.split_mode,
        no_front_fraction=args.no_front_fraction,
        val_fraction=args.val_fraction,
    )
    records = generate_dataset(cfg.dataset_config(), args.out)
    n_val = sum(r.split == "val" for r in records)
    print(f"{len(records)} records written to {args.out} ({len(records) - n_val} train, {n_val} val)")
    return EXIT_OK


# ---------------------------------------------------------------- train


def cmd_train(args) -> int:
    cfg = _config(
        args,
        steps=args.steps,
        objective=args.objective,
        batch_size=args.batch_size,
        lr_backbone=args.lr_backbone,
        lr_heads=args.lr_heads,
        weight_decay=args.weight_decay,
        lam=args.lam,
        sigma_polar=args.sigma_polar,
        sigma_azimuth=args.sigma_azimuth,
        sigma_rotation=args.sigma_rotation,
        eval_every=args.eval_every,
        log_every=args.log_every,
        crop_augment=False if args.no_crop else None,
    )
    manifest = Path(args.data)
    if not (manifest / "manifest.jsonl").exists() and not manifest.is_file():
        raise CliError(f"dataset not found: {args.data}")
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".metrics.jsonl")
    tcfg = cfg.train_config()
    lines = [_dumps({"meta": {"config": cfg.as_dict(), "data": str(args.data)}}, sort_keys=True)]

    def callback(step, br, report):
        rec = {}
        if step % cfg.log_every == 0 or step == tcfg.steps:
            rec["loss"] = br.as_dict()
        if report is not None:
            rec["eval"] = report.to_json()
        if rec:
            lines.append(_dumps({"step": step, **rec}, sort_keys=True))

    result = train_from_manifest(tcfg, manifest, callback=callback)
    estimator.save_checkpoint(result.params, args.out)
    log_path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    final = result.history[-1]["total"] if result.history else float("nan")
    print(f"trained {tcfg.steps} steps ({tcfg.objective.value}); final loss {final:.6f}")
    print(f"checkpoint: {args.out}")
    print(f"metrics log: {log_path}")
    return EXIT_OK


# ---------------------------------------------------------------- eval


def _load_eval_set(path: str, split: str):
    """Benchmark records and their image root; a dataset manifest is accepted too."""
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.jsonl"
    if not p.is_file():
        raise CliError(f"benchmark not found: {path}")
    first = next((ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()), None)
    if first is None:
        raise CliError(f"{path}: benchmark is empty")
    if "object_id" in json.loads(first):
        recs = [r for r in load_manifest(p) if split == "all" or r.split == split]
        gts = [BenchmarkRecord(f"{r.object_id}/{r.view}", r.file, r.orientation) for r in recs]
    else:
        gts = load_benchmark(p)
    if not gts:
        raise CliError(f"{path}: no records for split {split!r}")
    return gts, p.parent


def _load_predictions(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"predictions not found: {path}")
    return {r.id: r.orientation for r in load_benchmark(p)}


def cmd_eval(args) -> int:
    gts, root = _load_eval_set(args.benchmark, args.split)
    if args.predictions:
        preds = _load_predictions(args.predictions)
    else:
        params = _load_checkpoint(args.checkpoint)
        images = np.stack([_read_image(root / g.file) for g in gts])
        out = estimator.predict_angles(params, images)
        preds = {
            g.id: Orientation(out["polar"][i], out["azimuth"][i], out["rotation"][i])
            if out["has_front"][i]
            else Orientation.no_front()
            for i, g in enumerate(gts)
        }
    report = evaluate(preds, gts)
    print(render_report(report, label=args.label))
    if args.json:
        _emit(report.to_json(), args.json)
    return EXIT_OK


# ---------------------------------------------------------------- predict


def _load_checkpoint(path: str):
    if not Path(path).is_file():
        raise CliError(f"checkpoint not found: {path}")
    try:
        return estimator.load_checkpoint(path)
    except estimator.CheckpointError as exc:
        raise CliError(str(exc))


def _read_image(path: Path) -> np.ndarray:
    if not Path(path).is_file():
        raise CliError(f"image not found: {path}")
    return read_ppm(path)


def cmd_predict(args) -> int:
    params = _load_checkpoint(args.checkpoint)
    img = _read_image(args.image)
    mask = None
    if args.mask:
        mask = _read_image(args.mask).any(axis=-1)
    if img.shape[:2] != (params.arch.height, params.arch.width):
        raise CliError(
            f"{args.image} is {img.shape[1]}x{img.shape[0]}, model expects {params.arch.width}x{params.arch.height}"
        )
    est = estimator.predict(params, img, mask)
    out = {
        "image": str(args.image),
        "has_front": est.has_front,
        "confidence": est.confidence,
        "polar": est.polar,
        "azimuth": est.azimuth,
        "rotation": est.rotation,
        "direction8": direction8_of(est.azimuth).name if est.has_front else None,
    }
    _emit(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- annotate


def cmd_annotate(args) -> int:
    cfg = _config(args, symmetry_threshold=args.threshold, prune_symmetric_pair=True if args.prune else None)
    root = Path(args.views)
    imgs = {}
    for name in VIEW_NAMES:
        f = root / f"{name}.ppm"
        if not f.is_file():
            raise CliError(f"missing view file: {f}")
        imgs[name] = read_ppm(f)
    views = OrthoViewSet(**imgs)
    oracle = ScriptedOracle.from_file(args.mock) if args.mock else HttpOracle(args.url, cfg.oracle_timeout)
    acfg = AnnotateConfig(cfg.symmetry_threshold, cfg.prune_symmetric_pair)
    try:
        ann = annotate_front(views, oracle, acfg)
    except AnnotationError as exc:
        if args.out and exc.audit is not None:
            _emit({"label": None, "audit": exc.audit}, args.out)
        raise CliError(str(exc))
    canonical = is_canonical(views)
    _emit({"label": ann.label.name, "choice": ann.label.value, "canonical": canonical, "audit": ann.audit}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- describe / vote


def _placed(d: dict) -> PlacedObject:
    try:
        return PlacedObject(str(d["name"]), float(d["x"]), float(d["y"]),
                            None if d.get("azimuth") is None else float(d["azimuth"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"bad object record {d!r}: {exc}")


def cmd_describe(args) -> int:
    data = _read_json(args.input)
    items = data.get("objects") if isinstance(data, dict) else data
    if not isinstance(items, list) or not items:
        raise CliError(f"{args.input}: expected a non-empty list of objects")
    objs = [_placed(d) for d in items]
    directions = [{"name": o.name, "text": describe_direction(o)} for o in objs if o.azimuth is not None]
    relations = []
    for a in objs:
        if a.azimuth is None:
            continue
        for b in objs:
            if b is a:
                continue
            try:
                relations.append({"obj1": a.name, "obj2": b.name, "text": describe_relation(a, b)})
            except AmbiguousOrderError as exc:
                relations.append({"obj1": a.name, "obj2": b.name, "error": str(exc)})
    _emit({"directions": directions, "relations": relations}, args.out)
    return EXIT_OK


def cmd_vote(args) -> int:
    data = _read_json(args.input)
    items = data.get("observations") if isinstance(data, dict) else data
    if not isinstance(items, list) or not items:
        raise CliError(f"{args.input}: no observations")
    try:
        obs = [
            ViewObservation(float(d["camera_azimuth"]), float(d["predicted_azimuth"]), float(d.get("confidence", 1.0)))
            for d in items
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{args.input}: bad observation: {exc}")
    v = vote_orientation(obs, trim=args.trim)
    _emit({"front_azimuth": v.front_azimuth, "dispersion": v.dispersion, "kept": v.kept, "trimmed": v.trimmed}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- ablate


def cmd_ablate(args) -> int:
    cfg = _config(args, steps=args.steps)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not seeds:
        raise ConfigError("--seeds needs at least one seed")
    if not Path(args.data).exists():
        raise CliError(f"dataset not found: {args.data}")
    data = load_split(args.data, "train")
    val = load_split(args.data, "val")
    if len(data) == 0 or len(val) == 0:
        raise CliError(f"{args.data}: ablation needs both train and val records")
    h, w = data.images.shape[1:3]
    rows = {}
    for kind in (ObjectiveKind.DirectRegression, ObjectiveKind.OneHotClassification, ObjectiveKind.DistributionFitting):
        rows[kind.value] = []
        for s in seeds:
            tcfg = cfg.train_config(h, w)
            tcfg.objective, tcfg.seed, tcfg.eval_every = kind, s, 0
            res = train(tcfg, data)
            rep = validation_report(res.params, val)
            rows[kind.value].append({"seed": s, "azimuth_acc22_5": rep.azimuth.acc[22.5], "azimuth_abs": rep.azimuth.abs_mean})
    header = f"{'Objective':<16}" + "".join(f"{'seed ' + str(s):>10}" for s in seeds) + f"{'mean':>10}"
    print("Validation azimuth Acc@22.5° by learning objective")
    print(header)
    print("-" * len(header))
    for name, runs in rows.items():
        accs = [r["azimuth_acc22_5"] for r in runs]
        print(f"{name:<16}" + "".join(f"{a:>10.2f}" for a in accs) + f"{float(np.mean(accs)):>10.2f}")
    if args.json:
        _emit({"steps": cfg.steps, "seeds": seeds, "results": rows}, args.json)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _fraction(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}")
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {v}")
    return v


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML config file; flags override its values")
    common.add_argument("--seed", type=int, help="top-level seed for every random stream")

    p = argparse.ArgumentParser(prog="orientkit", description="Orientation estimation toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="render a synthetic labelled dataset")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--objects", type=_positive_int)
    g.add_argument("--views", type=_positive_int)
    g.add_argument("--size", type=_positive_int, help="image width and height in pixels")
    g.add_argument("--split-mode", choices=["object", "view"])
    g.add_argument("--no-front-fraction", type=_fraction)
    g.add_argument("--val-fraction", type=_fraction)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", parents=[common], help="train the estimator on a generated dataset")
    t.add_argument("--data", required=True, help="dataset directory or manifest")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="JSONL metrics log (default: <out>.metrics.jsonl)")
    t.add_argument("--steps", type=int)
    t.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
    t.add_argument("--batch-size", type=_positive_int)
    t.add_argument("--lr-backbone", type=_positive_float)
    t.add_argument("--lr-heads", type=_positive_float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--lam", type=float)
    t.add_argument("--sigma-polar", type=_positive_float)
    t.add_argument("--sigma-azimuth", type=_positive_float)
    t.add_argument("--sigma-rotation", type=_positive_float)
    t.add_argument("--eval-every", type=int)
    t.add_argument("--log-every", type=_positive_int)
    t.add_argument("--no-crop", action="store_true", help="disable random-crop augmentation")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint or a predictions file against a benchmark")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--predictions", help="JSONL predictions keyed by record id")
    e.add_argument("--benchmark", required=True, help="benchmark JSONL, or a dataset directory/manifest")
    e.add_argument("--split", default="val", choices=["train", "val", "all"], help="split used when given a manifest")
    e.add_argument("--json", help="write the report as JSON here ('-' for stdout)")
    e.add_argument("--label", default="", help="row label for the table")
    e.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="estimate the orientation in one PPM image")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--image", required=True)
    pr.add_argument("--mask", help="PPM mask; non-black pixels are kept")
    pr.add_argument("--out", help="write JSON here instead of stdout")
    pr.set_defaults(func=cmd_predict)

    a = sub.add_parser("annotate", parents=[common], help="label the front face from five orthographic views")
    a.add_argument("--views", required=True, help="directory holding view_px/mx/py/my/top.ppm")
    orc = a.add_mutually_exclusive_group(required=True)
    orc.add_argument("--url", help="HTTP oracle endpoint")
    orc.add_argument("--mock", help="scripted oracle replies, one per line")
    a.add_argument("--threshold", type=_fraction, help="symmetry threshold")
    a.add_argument("--prune", action="store_true", help="drop options of a symmetric view pair")
    a.add_argument("--out", help="write label and audit JSON here instead of stdout")
    a.set_defaults(func=cmd_annotate)

    d = sub.add_parser("describe", help="direction and relation sentences from JSON objects")
    d.add_argument("--input", required=True, help="JSON file ('-' for stdin)")
    d.add_argument("--out")
    d.set_defaults(func=cmd_describe)

    v = sub.add_parser("vote", help="fuse multi-view azimuth predictions into one heading")
    v.add_argument("--input", required=True, help="JSON file ('-' for stdin)")
    v.add_argument("--trim", type=_positive_float, default=90.0, help="outlier trim radius in degrees")
    v.add_argument("--out")
    v.set_defaults(func=cmd_vote)

    ab = sub.add_parser("ablate", parents=[common], help="compare the three learning objectives")
    ab.add_argument("--data", required=True)
    ab.add_argument("--steps", type=int)
    ab.add_argument("--seeds", default="0,1,2", help="comma-separated training seeds")
    ab.add_argument("--json", help="write per-seed results here")
    ab.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, estimator.ConfigError) as exc:
        print(f"orientkit {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"orientkit {args.command}: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_RUNTIME
    except (CliError, DomainError, AnnotationError, OSError, ValueError) as exc:
        print(f"orientkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
