"""Command-line pipeline: generate, extract, label, train, eval, ablate,
ingest, report.

Each subcommand runs standalone on the previous stage's outputs.  A single
JSON config file can carry every knob; individual flags override it.  The
only environment variables honored are TRIGGERKIT_OUT (output path
override) and TRIGGERKIT_JOBS (worker count).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

from . import dataio
from .events import Thresholds, extract_video_events
from .evaluation import (EvalReport, evaluate, position_histograms, run_ablation,
                         run_baseline)
from .labeling import (DatasetBundle, Tolerances, build_dataset,
                       build_labeling_context, label_video)
from .scene import N_LAYOUTS, WorldConfig
from .training import TrainConfig, train


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    dataio.check_version(cfg, path)
    return cfg


def _world_from(cfg: dict) -> WorldConfig:
    return WorldConfig(**cfg.get("world", {}))


def _thresholds_from(cfg: dict) -> Thresholds:
    return Thresholds(**cfg.get("thresholds", {}))


def _tolerances_from(cfg: dict) -> Tolerances:
    return Tolerances(**cfg.get("tolerances", {}))


def _train_config_from(cfg: dict, overrides: dict | None = None) -> TrainConfig:
    merged = dict(cfg.get("train", {}))
    merged.update(overrides or {})
    return TrainConfig(**merged)


def _out_dir(args_out: str) -> str:
    return os.environ.get("TRIGGERKIT_OUT", args_out)


def _jobs(args_jobs: int | None) -> int:
    if args_jobs is not None:
        return args_jobs
    return int(os.environ.get("TRIGGERKIT_JOBS", "1"))


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    n_videos = args.n_videos or cfg.get("n_videos", 200)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    store = cfg.get("store_trajectories", True) and not args.no_trajectories
    world = _world_from(cfg)
    out_dir = _out_dir(args.out or cfg.get("out_dir", "dataset"))
    # Validate the layout cycle before any simulation happens.
    layout_ids = cfg.get("layout_ids")
    if layout_ids is not None:
        bad = [l for l in layout_ids if not 1 <= l <= N_LAYOUTS]
        if bad:
            print(f"error: invalid layout ids {bad}", file=sys.stderr)
            return 2
        layout_ids = tuple(layout_ids)
    dataset = build_dataset(
        n_videos, seed, world, _thresholds_from(cfg), _tolerances_from(cfg),
        keep_sims=store, n_jobs=_jobs(args.jobs), layout_ids=layout_ids,
    )
    dataio.save_dataset(dataset, out_dir, store_trajectories=store)
    counts = dataset.pair_counts()
    print(f"dataset: {len(dataset.videos)}/{n_videos} usable videos, "
          f"pairs train/val/test = {counts['train']}/{counts['val']}/{counts['test']} "
          f"-> {out_dir}")
    return 0


def cmd_extract(args) -> int:
    cfg = _load_config(args.config)
    thresholds = _thresholds_from(cfg)
    video_dir = os.path.join(args.dataset, "videos")
    names = sorted(n for n in os.listdir(video_dir) if n.endswith(".jsonl"))
    videos = {}
    for name in names:
        video_id, sim = dataio.read_video_jsonl(os.path.join(video_dir, name))
        events, _ = extract_video_events(sim, thresholds)
        from .labeling import VideoData

        videos[video_id] = VideoData(video_id, sim.scene, sim.config, events, [])
    out = _out_dir(args.out or os.path.join(args.dataset, "events.jsonl"))
    from .events import EVENT_FEATURE_DIM

    dataio.write_events_jsonl(out, videos, EVENT_FEATURE_DIM)
    print(f"extracted events for {len(videos)} videos -> {out}")
    return 0


def cmd_label(args) -> int:
    cfg = _load_config(args.config)
    thresholds = _thresholds_from(cfg)
    tolerances = _tolerances_from(cfg)
    video_dir = os.path.join(args.dataset, "videos")
    names = sorted(n for n in os.listdir(video_dir) if n.endswith(".jsonl"))
    from .labeling import VideoData

    videos = {}
    for name in names:
        video_id, sim = dataio.read_video_jsonl(os.path.join(video_dir, name))
        ctx = build_labeling_context(sim, thresholds, tolerances)
        pairs = label_video(ctx, video_id)
        videos[video_id] = VideoData(video_id, sim.scene, sim.config, ctx.events, pairs)
    out = _out_dir(args.out or os.path.join(args.dataset, "pairs.jsonl"))
    dataio.write_pairs_jsonl(out, videos)
    total = sum(len(v.pairs) for v in videos.values())
    print(f"labelled {total} pairs across {len(videos)} videos -> {out}")
    return 0


def _load_bundle(args) -> DatasetBundle:
    if getattr(args, "external", False):
        return dataio.ingest_external_events(args.dataset)
    return dataio.load_dataset(args.dataset)


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.layers is not None:
        overrides["n_layers"] = args.layers
    train_config = _train_config_from(cfg, overrides)
    dataset = _load_bundle(args)
    result = train(dataset, train_config)
    out = _out_dir(args.out)
    dataio.save_checkpoint(result.model, out)
    curve_path = os.path.splitext(out)[0] + "_curve.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_accuracy"])
        for row in result.curve:
            writer.writerow([row.epoch, repr(row.train_loss), repr(row.val_accuracy)])
    manifest = {
        "format_version": dataio.FORMAT_VERSION,
        "kind": "train_manifest",
        "train_config": asdict(train_config),
        "best_epoch": result.best_epoch,
        "dataset": args.dataset,
    }
    with open(os.path.splitext(out)[0] + "_manifest.json", "w") as fh:
        fh.write(dataio.dumps(manifest) + "\n")
    final = result.curve[result.best_epoch - 1].val_accuracy if result.curve else float("nan")
    print(f"trained {result.model.name}: best epoch {result.best_epoch}, "
          f"val accuracy {final:.2f}% -> {out}")
    return 0


def _report_to_dict(report: EvalReport) -> dict:
    return {
        "format_version": dataio.FORMAT_VERSION,
        "kind": "eval_report",
        "split": report.split,
        "model": report.model_name,
        "accuracy": report.accuracy,
        "accuracy_all_hit": report.accuracy_all_hit,
        "n_instances": report.n_instances,
        "per_video": {str(k): list(v) for k, v in report.per_video.items()},
        "config_fingerprint": report.config_fingerprint,
    }


def cmd_eval(args) -> int:
    dataset = _load_bundle(args)
    if args.baseline:
        report = run_baseline(args.baseline, dataset, args.split, seed=args.seed or 0)
    else:
        model = dataio.load_checkpoint(args.model)
        report = evaluate(model, dataset, args.split)
    out = _out_dir(args.out)
    with open(out, "w") as fh:
        fh.write(dataio.dumps(_report_to_dict(report)) + "\n")
    print(f"{report.model_name} on {report.split}: "
          f"top-1 {report.accuracy:.2f}% (all-hit {report.accuracy_all_hit:.2f}%) "
          f"over {report.n_instances} instances -> {out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    train_config = _train_config_from(cfg, {"epochs": args.epochs} if args.epochs else None)
    dataset = _load_bundle(args)
    flags = set(args.flags.split(",")) if args.flags else set()
    report = run_ablation(flags, dataset, train_config, args.split)
    out = _out_dir(args.out)
    with open(out, "w") as fh:
        fh.write(dataio.dumps(_report_to_dict(report)) + "\n")
    print(f"{report.model_name} on {report.split}: top-1 {report.accuracy:.2f}% -> {out}")
    return 0


def cmd_ingest(args) -> int:
    dataset = dataio.ingest_external_events(args.path)
    counts = dataset.pair_counts()
    print(f"ingested {len(dataset.videos)} videos, feature_dim {dataset.feature_dim}, "
          f"pairs train/val/test = {counts['train']}/{counts['val']}/{counts['test']}")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.reports:
        with open(path) as fh:
            rec = json.load(fh)
        dataio.check_version(rec, path)
        rows.append({"model": rec["model"], "split": rec["split"],
                     "accuracy": rec["accuracy"],
                     "accuracy_all_hit": rec["accuracy_all_hit"],
                     "n_instances": rec["n_instances"]})
    rows.sort(key=lambda r: (r["model"], r["split"]))
    out_dir = _out_dir(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["model", "split", "accuracy",
                                                "accuracy_all_hit", "n_instances"])
        writer.writeheader()
        writer.writerows(rows)

    histogram_done = False
    if args.dataset:
        dataset = dataio.load_dataset(args.dataset)
        triggers, targets = position_histograms(dataset)
        with open(os.path.join(out_dir, "position_histogram.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "position", "count"])
            for pos in sorted(triggers):
                writer.writerow(["trigger", pos, triggers[pos]])
            for pos in sorted(targets):
                writer.writerow(["target", pos, targets[pos]])
        histogram_done = True

    if not args.no_plots:
        from . import plots

        if rows:
            plots.accuracy_bars(rows, os.path.join(out_dir, "accuracy.png"))
        if args.curves:
            with open(args.curves) as fh:
                curve_rows = [{"epoch": int(r["epoch"]),
                               "train_loss": float(r["train_loss"]),
                               "val_accuracy": float(r["val_accuracy"])}
                              for r in csv.DictReader(fh)]
            plots.loss_curves(curve_rows, os.path.join(out_dir, "loss_curve.png"))
        if histogram_done:
            plots.position_histogram(triggers, targets,
                                     os.path.join(out_dir, "position_histogram.png"))
    print(f"report with {len(rows)} rows -> {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="triggerkit",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate, extract and label a dataset")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--n-videos", type=int, dest="n_videos")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-trajectories", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", help="re-extract events from stored videos")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("label", help="re-label pairs from stored videos")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train the relational model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--external", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or baseline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model")
    p.add_argument("--baseline", choices=["random", "first_collision", "node_embeddings"])
    p.add_argument("--split", default="val")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--external", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate an ablated model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config")
    p.add_argument("--flags", default="")
    p.add_argument("--split", default="val")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--external", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("ingest", help="validate an external event dataset")
    p.add_argument("--path", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", help="summarize reports to CSV and plots")
    p.add_argument("--reports", nargs="+", default=[])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dataset")
    p.add_argument("--curves")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (dataio.FormatError, ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
