"""Command-line entry point: ``scriptorium <command> ...``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import CheckpointError, TrainConfig, load_checkpoint, predict_proba, save_checkpoint
from .dataset import (
    ManifestError,
    SplitError,
    SplitManifest,
    SynthConfig,
    choose_separate_codices,
    generate_synthetic,
    load_manifest,
    make_splits,
)
from .imaging import PreprocessMode, read_image
from .patching import PatchSpec
from .pipeline import DEFAULT_PATCH, Experiment, line_patches
from .scoring import DEFAULT_THRESHOLD, UNRELIABLE_THRESHOLD, decide, error_reject_curve, line_score, threshold_grid, write_curve_csv

log = logging.getLogger("scriptorium")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def _echo_config(path: Path, command: str, args: argparse.Namespace) -> None:
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}
    resolved["command"] = command
    resolved["version"] = __version__
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(resolved, indent=1, sort_keys=True, default=str) + "\n")


def _thread_limit():
    n = os.environ.get("SCRIPTORIUM_THREADS")
    if not n:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(int(n))


def _class_thresholds(names, unreliable: str | None, threshold: float):
    if not unreliable:
        return None
    out = {}
    for name in unreliable.split(","):
        name = name.strip()
        if name not in names:
            raise ValueError(f"unknown class {name!r} in --unreliable")
        out[names.index(name)] = max(threshold, UNRELIABLE_THRESHOLD)
    return out


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        num_classes=args.classes,
        codices_per_class=args.codices,
        lines_per_codex=args.lines,
        lines_per_page=args.lines_per_page,
        seed=args.seed,
    )
    manifest = generate_synthetic(cfg, args.out)
    _echo_config(args.out / "synth.config.json", "synth", args)
    print(f"wrote {cfg.num_lines} lines, manifest {manifest}")
    return 0


def cmd_split(args) -> int:
    records = load_manifest(args.manifest)
    if args.separate:
        separate = {c.strip() for c in args.separate.split(",") if c.strip()}
    else:
        separate = choose_separate_codices(records, args.seed)
    split = make_splits(records, separate, args.cap, args.seed, args.test_b_cap)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    split.save(args.out)
    _echo_config(args.out.with_suffix(".config.json"), "split", args)
    print(" ".join(f"{p}={len(split.partition(p))}" for p in ("train", "validation", "test_A", "test_B")))
    return 0


def _experiment(args) -> Experiment:
    records = load_manifest(args.manifest)
    split = SplitManifest.load(args.split)
    return Experiment(records, split, getattr(args, "patch", DEFAULT_PATCH))


def cmd_train(args) -> int:
    exp = _experiment(args)
    tcfg = TrainConfig(batch_size=args.batch_size, epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    result = exp.train(args.mode, tcfg, model_seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "model.scrb").write_bytes(save_checkpoint(result.params))
    with open(args.out / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_f1"])
        for rec in result.history:
            writer.writerow([rec.epoch, f"{rec.train_loss:.8f}", f"{rec.val_f1:.8f}"])
    _echo_config(args.out / "train.config.json", "train", args)
    if result.diverged:
        print(f"training diverged after {len(result.history)} epochs", file=sys.stderr)
        return 1
    print(f"best epoch {result.best_epoch}, val F1 {result.history[result.best_epoch - 1].val_f1:.4f}")
    return 0


def _load_params(path: Path):
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} not found")
    return load_checkpoint(path.read_bytes())


def cmd_evaluate(args) -> int:
    params = _load_params(args.checkpoint)
    cfg = params.config
    args.patch = PatchSpec(cfg.input_height, cfg.input_width)
    exp = _experiment(args)
    if list(cfg.class_names) != exp.split.classes:
        raise ValueError("checkpoint classes do not match the split's class list")
    cls_t = _class_thresholds(list(cfg.class_names), args.unreliable, args.threshold)
    args.out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for part in ("test_A", "test_B"):
        results, _ = exp.evaluate(params, part, args.threshold, cls_t)
        for level, res in results.items():
            stem = args.out / f"{part}_{level}"
            res.report.to_json(stem.with_suffix(".json"))
            stem.with_suffix(".txt").write_text(res.report.to_text())
            res.confusion.to_csv(f"{stem}_confusion.csv", cfg.class_names)
            summary[f"{part}/{level}"] = res.report.weighted_f1
    _echo_config(args.out / "evaluate.config.json", "evaluate", args)
    for key, f1 in summary.items():
        print(f"{key:14s} weighted F1 {f1:.4f}")
    return 0


def _collect_inputs(path: Path):
    """``(line_id, section, image path)`` from a manifest CSV or an image directory."""
    if path.is_file():
        return [(r.line_id, r.codex, r.image_path) for r in load_manifest(path)]
    if not path.is_dir():
        raise FileNotFoundError(f"input {path} not found")
    items = []
    for img in sorted(p for p in path.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES):
        rel = img.relative_to(path)
        section = rel.parent.as_posix() if rel.parent != Path(".") else "."
        items.append((img.stem, section, img))
    return items


def cmd_predict(args) -> int:
    params = _load_params(args.checkpoint)
    cfg = params.config
    spec = PatchSpec(cfg.input_height, cfg.input_width)
    names = list(cfg.class_names) or [str(i) for i in range(cfg.num_classes)]
    cls_t = _class_thresholds(names, args.unreliable, args.threshold)
    hist: dict[str, np.ndarray] = {}
    skipped = 0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line_id", *(f"p_{n}" for n in names), "decision"])
        for line_id, section, image in _collect_inputs(args.input):
            patches = line_patches(read_image(image), cfg.mode, spec, cfg.mask_threshold)
            if patches is None:
                skipped += 1
                continue
            ls = line_score(predict_proba(params, patches), line_id)
            d = decide(ls.score, args.threshold, cls_t)
            writer.writerow([line_id, *(f"{p:.6f}" for p in ls.score), names[d.label] if d.accepted else "REJECT"])
            counts = hist.setdefault(section, np.zeros(cfg.num_classes, dtype=np.int64))
            if d.accepted:
                counts[d.label] += 1
    hist_path = args.histogram or args.out.with_name(args.out.stem + "_histogram.csv")
    with open(hist_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["section", "class", "count"])
        for section in sorted(hist):
            for i, n in enumerate(names):
                writer.writerow([section, n, int(hist[section][i])])
    _echo_config(args.out.with_suffix(".config.json"), "predict", args)
    if skipped:
        print(f"skipped {skipped} uninformative snippets", file=sys.stderr)
    return 0


def cmd_reject_curve(args) -> int:
    params = _load_params(args.checkpoint)
    args.patch = PatchSpec(params.config.input_height, params.config.input_width)
    exp = _experiment(args)
    _, line_scores = exp.evaluate(params, args.partition)
    if not line_scores:
        raise ValueError(f"partition {args.partition} has no lines")
    scores = np.array([ls.score for ls, _ in line_scores])
    labels = np.array([lbl for _, lbl in line_scores])
    grid = threshold_grid(args.step)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(error_reject_curve(scores, labels, grid), args.out)
    if args.by_class:
        for i, name in enumerate(params.config.class_names):
            sel = labels == i
            if sel.any():
                path = args.out.with_name(f"{args.out.stem}_{name}.csv")
                write_curve_csv(error_reject_curve(scores[sel], labels[sel], grid), path)
    _echo_config(args.out.with_suffix(".config.json"), "reject-curve", args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scriptorium", description="Line-based scribe identification")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default="WARNING", help="logging level (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic manuscript corpus")
    p.add_argument("--classes", type=int, default=7)
    p.add_argument("--codices", type=int, default=3, help="codices per class")
    p.add_argument("--lines", type=int, default=60, help="lines per codex")
    p.add_argument("--lines-per-page", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="codex-disjoint train/validation/test_A/test_B split")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--separate", help="comma-separated held-out codices (default: one random codex per class)")
    p.add_argument("--cap", type=int, default=None, help="lines per class drawn from training codices")
    p.add_argument("--test-b-cap", type=int, default=None, help="test_B lines per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the patch classifier")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--mode", choices=[m.value for m in PreprocessMode], default="GS_MASK")
    p.add_argument("--patch", type=PatchSpec.parse, default=DEFAULT_PATCH, help="HxW (default: 32x32)")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    def add_reject_flags(p):
        p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        p.add_argument("--unreliable", help=f"comma-separated classes judged at {UNRELIABLE_THRESHOLD:.2f}")

    p = sub.add_parser("evaluate", help="patch/line/page reports on test_A and test_B")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    add_reject_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify unlabeled lines")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True, help="image directory or manifest CSV")
    add_reject_flags(p)
    p.add_argument("--out", type=Path, required=True, help="per-line CSV")
    p.add_argument("--histogram", type=Path, help="per-section class counts (default: <out>_histogram.csv)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("reject-curve", help="error-reject curve CSV on line scores")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--partition", default="test_B", choices=["train", "validation", "test_A", "test_B"])
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--by-class", action="store_true", help="also write one curve per true class")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_reject_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except (ManifestError, SplitError, CheckpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
