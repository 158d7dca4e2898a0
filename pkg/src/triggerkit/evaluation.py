"""Evaluation metric, reference baselines, ablation harness.

The metric is top-1 trigger accuracy: an instance counts as correct when
its highest-scoring premise event belongs to the ground-truth trigger set
(any hit).  A stricter all-hit rate (the |T| best-scored premises exactly
cover the trigger set) is reported alongside.  Ties break to the earliest
premise event, then the lowest event id.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .labeling import DatasetBundle
from .model import GraphInstance
from .training import TrainConfig, TrainedModel, TrainResult, build_instances, fit_scaler, train

BASELINE_NAMES = ("random", "first_collision", "node_embeddings")

ABLATION_FLAGS = (
    "only_temporal",
    "only_semantic",
    "layers_2",
    "no_msg_skip",
    "no_layer_skip",
    "no_skip",
    "no_distance_penalty",
)


@dataclass
class EvalReport:
    split: str
    model_name: str
    accuracy: float                 # top-1 any-hit, percent
    accuracy_all_hit: float         # percent
    n_instances: int
    per_video: dict[int, tuple[int, int]]   # video id -> (correct, total)
    config_fingerprint: str = ""

    def recomputed_accuracy(self) -> float:
        correct = sum(c for c, _ in self.per_video.values())
        total = sum(t for _, t in self.per_video.values())
        return 100.0 * correct / total if total else 0.0


def fingerprint(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _argmax_with_ties(scores: np.ndarray) -> int:
    # Highest score; earlier premise index wins ties (the premise list is
    # stored in temporal order, so index order encodes "earliest, lowest id").
    return max(range(len(scores)), key=lambda i: (scores[i], -i))


def _top_k_set(scores: np.ndarray, k: int) -> set[int]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return set(order[:k])


def evaluate_scored(instances: list[GraphInstance], score_fn, model_name: str,
                    split: str, config_fingerprint: str = "") -> EvalReport:
    """Metric computation for any per-instance scoring function."""
    per_video: dict[int, list[int]] = {}
    correct = 0
    all_hit = 0
    for inst in instances:
        scores = np.asarray(score_fn(inst), dtype=np.float64)
        if scores.shape != (inst.n_nodes,):
            raise ValueError("scorer must return one score per premise event")
        best = _argmax_with_ties(scores)
        hit = inst.labels[best] == 1.0
        trigger_idx = {i for i, y in enumerate(inst.labels) if y == 1.0}
        if _top_k_set(scores, len(trigger_idx)) == trigger_idx:
            all_hit += 1
        correct += int(hit)
        bucket = per_video.setdefault(inst.video_id, [0, 0])
        bucket[0] += int(hit)
        bucket[1] += 1
    n = len(instances)
    return EvalReport(
        split=split,
        model_name=model_name,
        accuracy=100.0 * correct / n if n else 0.0,
        accuracy_all_hit=100.0 * all_hit / n if n else 0.0,
        n_instances=n,
        per_video={vid: tuple(c) for vid, c in sorted(per_video.items())},
        config_fingerprint=config_fingerprint,
    )


def evaluate(model: TrainedModel, dataset: DatasetBundle, split: str) -> EvalReport:
    instances = build_instances(dataset, split, model.scaler, model.config.window)
    fp = fingerprint({"model": model.name, "layers": model.config.n_layers,
                      "d": model.config.feature_dim, "split": split})
    return evaluate_scored(instances, model.scores, model.name, split, fp)


def random_expectation(instances: list[GraphInstance]) -> float:
    """Analytic top-1 accuracy (percent) of a uniform random scorer."""
    if not instances:
        return 0.0
    return 100.0 * float(np.mean([inst.labels.sum() / inst.n_nodes
                                  for inst in instances]))


def _random_scorer(seed: int):
    rng = np.random.default_rng(seed)

    def score(inst: GraphInstance) -> np.ndarray:
        return rng.random(inst.n_nodes)

    return score


def _first_collision_scorer(inst: GraphInstance) -> np.ndarray:
    """One-hot on the earliest collision-type premise (earliest premise
    when no collision exists among the premises)."""
    scores = np.zeros(inst.n_nodes)
    for i, kind in enumerate(inst.premise_types):
        if kind == "collision":
            scores[i] = 1.0
            return scores
    scores[0] = 1.0
    return scores


def run_baseline(name: str, dataset: DatasetBundle, split: str = "val",
                 seed: int = 0, train_config: TrainConfig | None = None) -> EvalReport:
    """Reference scorers: seeded uniform, earliest collision, and a trained
    linear map on event features with no relational structure."""
    if name not in BASELINE_NAMES:
        raise ValueError(f"unknown baseline {name!r}")
    if name == "node_embeddings":
        config = train_config or TrainConfig(epochs=30, learning_rate=1e-3, seed=seed)
        result = train_node_embeddings(dataset, config)
        report = evaluate(result.model, dataset, split)
        report.model_name = "node_embeddings"
        return report
    scaler = fit_scaler(dataset)
    instances = build_instances(dataset, split, scaler, None)
    fp = fingerprint({"baseline": name, "seed": seed, "split": split})
    if name == "random":
        return evaluate_scored(instances, _random_scorer(seed), "random", split, fp)
    return evaluate_scored(instances, _first_collision_scorer, "first_collision", split, fp)


def train_node_embeddings(dataset: DatasetBundle, config: TrainConfig) -> TrainResult:
    """Linear per-event embedding, zero message-passing layers."""
    flat = TrainConfig(
        epochs=config.epochs, batch_size=config.batch_size,
        learning_rate=config.learning_rate, lr_decay=config.lr_decay,
        seed=config.seed, n_layers=0, use_input_proj=True,
        positive_weight=config.positive_weight,
        early_stop_patience=config.early_stop_patience,
    )
    result = train(dataset, flat)
    result.model.name = "node_embeddings"
    return result


def ablation_config(flags: set[str], base: TrainConfig) -> TrainConfig:
    """Train configuration for one ablation flag set."""
    unknown = flags - set(ABLATION_FLAGS)
    if unknown:
        raise ValueError(f"unknown ablation flags {sorted(unknown)}")
    if "only_temporal" in flags and "only_semantic" in flags:
        raise ValueError("contradictory flags: only_temporal and only_semantic")
    updates = {}
    if "only_temporal" in flags:
        updates["temporal_only"] = True
    if "only_semantic" in flags:
        updates["semantic_only"] = True
    if "layers_2" in flags:
        updates["n_layers"] = 2
    if "no_msg_skip" in flags or "no_skip" in flags:
        updates["no_msg_skip"] = True
    if "no_layer_skip" in flags or "no_skip" in flags:
        updates["no_layer_skip"] = True
    if "no_distance_penalty" in flags:
        updates["no_distance_penalty"] = True
    from dataclasses import replace

    return replace(base, **updates)


def run_ablation(flags: set[str], dataset: DatasetBundle,
                 base: TrainConfig | None = None, split: str = "val") -> EvalReport:
    """Train one ablated model and report its validation accuracy."""
    base = base or TrainConfig()
    config = ablation_config(set(flags), base)
    result = train(dataset, config)
    report = evaluate(result.model, dataset, split)
    report.model_name = "relnet[" + ",".join(sorted(flags)) + "]" if flags else "relnet"
    return report


def position_histograms(dataset: DatasetBundle) -> tuple[dict[int, int], dict[int, int]]:
    """Counts of trigger and target positions along each video's event order."""
    from .events import Event

    trigger_counts: dict[int, int] = {}
    target_counts: dict[int, int] = {}
    for video_id in sorted(dataset.videos):
        data = dataset.videos[video_id]
        ordered = sorted(data.events, key=Event.sort_key)
        index_of = {e.event_id: i for i, e in enumerate(ordered)}
        for pair in data.pairs:
            t = index_of[pair.target_event_id]
            target_counts[t] = target_counts.get(t, 0) + 1
            for trig in sorted(pair.trigger_event_ids):
                i = index_of[trig]
                trigger_counts[i] = trigger_counts.get(i, 0) + 1
    return trigger_counts, target_counts
