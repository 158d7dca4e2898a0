#!/usr/bin/env python3
"""Desk-scale experiment: dataset, model, baselines, ablations, report.

Generates (or reuses) a 1000-video dataset, trains the relational model
and the node-embedding baseline, evaluates the deterministic baselines,
runs the main ablations, and writes a CSV summary plus plots.

    python3 scripts/run_desk_experiment.py --out runs/desk1k [--n-videos 1000]
"""

import argparse
import csv
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from triggerkit import dataio
from triggerkit import plots
from triggerkit.evaluation import (evaluate, position_histograms, random_expectation,
                                   run_ablation, run_baseline)
from triggerkit.labeling import build_dataset
from triggerkit.training import TrainConfig, build_instances, fit_scaler, train

TRAIN = TrainConfig(epochs=12, batch_size=128, learning_rate=1e-3, lr_decay=0.95,
                    seed=0, n_layers=4, window=4.0, early_stop_patience=None)

ABLATIONS = ({"only_temporal"}, {"only_semantic"}, {"layers_2"},
             {"no_msg_skip"}, {"no_layer_skip"}, {"no_skip"},
             {"no_distance_penalty"})


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk1k")
    parser.add_argument("--n-videos", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=20240811)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--skip-ablations", action="store_true")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    dataset_dir = os.path.join(args.out, "dataset")
    if os.path.exists(os.path.join(dataset_dir, "manifest.json")):
        print(f"loading dataset from {dataset_dir}")
        dataset = dataio.load_dataset(dataset_dir)
    else:
        t0 = time.time()
        dataset = build_dataset(args.n_videos, seed=args.seed, n_jobs=args.jobs)
        print(f"generated {len(dataset.videos)} videos "
              f"({dataset.pair_counts()}) in {time.time() - t0:.0f}s")
        dataio.save_dataset(dataset, dataset_dir, store_trajectories=False)

    rows = []

    def record(report, note=""):
        rows.append({"model": report.model_name, "split": report.split,
                     "accuracy": round(report.accuracy, 2),
                     "accuracy_all_hit": round(report.accuracy_all_hit, 2),
                     "n_instances": report.n_instances})
        print(f"  {report.model_name:/<0} {report.split}: "
              f"{report.accuracy:.2f}% {note}")

    t0 = time.time()
    result = train(dataset, TRAIN)
    print(f"trained relational model in {time.time() - t0:.0f}s "
          f"(best epoch {result.best_epoch})")
    dataio.save_checkpoint(result.model, os.path.join(args.out, "relnet.json"))
    with open(os.path.join(args.out, "relnet_curve.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_accuracy"])
        for row in result.curve:
            writer.writerow([row.epoch, row.train_loss, row.val_accuracy])
    for split in ("val", "test"):
        record(evaluate(result.model, dataset, split))

    node_cfg = TrainConfig(epochs=TRAIN.epochs, batch_size=TRAIN.batch_size,
                           learning_rate=1e-3, seed=0, early_stop_patience=None)
    for split in ("val", "test"):
        record(run_baseline("node_embeddings", dataset, split, train_config=node_cfg))
        record(run_baseline("first_collision", dataset, split))
        record(run_baseline("random", dataset, split, seed=0))

    scaler = fit_scaler(dataset)
    expectation = random_expectation(build_instances(dataset, "val", scaler))
    print(f"  analytic random expectation (val): {expectation:.2f}%")

    if not args.skip_ablations:
        for flags in ABLATIONS:
            record(run_ablation(flags, dataset, TRAIN))

    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["model", "split", "accuracy",
                                                "accuracy_all_hit", "n_instances"])
        writer.writeheader()
        writer.writerows(rows)

    triggers, targets = position_histograms(dataset)
    plots.accuracy_bars(rows, os.path.join(args.out, "accuracy.png"))
    plots.position_histogram(triggers, targets,
                             os.path.join(args.out, "position_histogram.png"))
    print(f"wrote {args.out}/summary.csv and plots")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
