#!/usr/bin/env python3
"""Two-minute end-to-end demo on a tiny dataset.

    python3 scripts/quick_demo.py
"""

import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from triggerkit.evaluation import evaluate, random_expectation, run_baseline
from triggerkit.labeling import build_dataset
from triggerkit.training import TrainConfig, build_instances, fit_scaler, train


def main() -> int:
    t0 = time.time()
    dataset = build_dataset(24, seed=7, n_jobs=2)
    counts = dataset.pair_counts()
    print(f"dataset: {len(dataset.videos)} videos, pairs {counts} "
          f"({time.time() - t0:.0f}s)")

    config = TrainConfig(epochs=6, batch_size=32, learning_rate=1e-3, seed=0,
                         n_layers=2, early_stop_patience=None)
    result = train(dataset, config)
    for row in result.curve:
        print(f"  epoch {row.epoch}: loss {row.train_loss:.4f} "
              f"val {row.val_accuracy:.1f}%")

    report = evaluate(result.model, dataset, "val")
    fc = run_baseline("first_collision", dataset, "val")
    scaler = fit_scaler(dataset)
    rand = random_expectation(build_instances(dataset, "val", scaler))
    print(f"relational model {report.accuracy:.1f}% | first collision "
          f"{fc.accuracy:.1f}% | random expectation {rand:.1f}%")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
