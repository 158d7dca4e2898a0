"""Training loop: feature scaling, instance tensors, Adam, epoch schedule.

Event features are z-scored with statistics from the training split (raw
positions span hundreds of units, which would saturate the tanh/sigmoid
nonlinearities); the scaler is part of the trained model.  Instances are
premise graphs with canonically sorted edge arrays so results do not
depend on construction order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allen import temporal_distance
from .events import Event
from .labeling import DatasetBundle
from .model import (GraphInstance, ModelConfig, ModelParams, flatten_params,
                    forward, gradients, init_params, unflatten_params)
from .relations import premise_edges


class TrainingDivergedError(Exception):
    def __init__(self, epoch: int, step: int, value: float):
        super().__init__(f"training diverged at epoch {epoch}, step {step}: loss {value}")
        self.epoch = epoch
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-4
    lr_decay: float = 0.95
    seed: int = 0
    n_layers: int = 4
    window: float | None = None
    use_input_proj: bool = False
    temporal_only: bool = False
    semantic_only: bool = False
    no_msg_skip: bool = False
    no_layer_skip: bool = False
    no_distance_penalty: bool = False
    positive_weight: float = 1.0
    early_stop_patience: int | None = 10

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0:
            raise ValueError("epochs must be >= 0 and batch_size positive")
        if self.learning_rate <= 0 or not 0 < self.lr_decay <= 1:
            raise ValueError("learning_rate must be positive and lr_decay in (0, 1]")
        if self.positive_weight <= 0:
            raise ValueError("positive_weight must be positive")
        if self.temporal_only and self.semantic_only:
            raise ValueError("temporal_only and semantic_only are mutually exclusive")

    def model_config(self, feature_dim: int) -> ModelConfig:
        return ModelConfig(
            feature_dim=feature_dim,
            n_layers=self.n_layers,
            use_input_proj=self.use_input_proj,
            temporal_only=self.temporal_only,
            semantic_only=self.semantic_only,
            no_msg_skip=self.no_msg_skip,
            no_layer_skip=self.no_layer_skip,
            no_distance_penalty=self.no_distance_penalty,
            window=self.window,
        )


@dataclass
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "FeatureScaler":
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        return cls(mean, np.maximum(std, 1e-6))

    @classmethod
    def identity(cls, dim: int) -> "FeatureScaler":
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std


def fit_scaler(dataset: DatasetBundle, split: str = "train") -> FeatureScaler:
    rows = [e.features for vid in dataset.splits[split]
            for e in dataset.videos[vid].events]
    if not rows:
        return FeatureScaler.identity(dataset.feature_dim)
    return FeatureScaler.fit(np.asarray(rows))


def build_instances(dataset: DatasetBundle, split: str, scaler: FeatureScaler,
                    window: float | None = None) -> list[GraphInstance]:
    """Premise-graph tensors for every pair of the split.

    Edges are sorted by (destination, source) so scatter sums are
    bit-stable for any storage order upstream.
    """
    instances: list[GraphInstance] = []
    for video_id in dataset.splits[split]:
        data = dataset.videos[video_id]
        ordered = sorted(data.events, key=Event.sort_key)
        feats = scaler.transform(np.asarray([e.features for e in ordered]))
        intervals = [e.interval() for e in ordered]
        index_of = {e.event_id: i for i, e in enumerate(ordered)}
        for pair in data.pairs:
            t_idx = index_of[pair.target_event_id]
            if t_idx == 0:
                continue
            premises = ordered[:t_idx]
            labels = np.array([1.0 if e.event_id in pair.trigger_event_ids else 0.0
                               for e in premises])
            edges = premise_edges(intervals[:t_idx], window)
            edges.sort(key=lambda uv: (uv[1], uv[0]))
            src = np.array([u for u, _ in edges], dtype=np.intp)
            dst = np.array([v for _, v in edges], dtype=np.intp)
            t4 = np.zeros((len(edges), 4))
            edist = np.zeros(len(edges))
            for row, (u, v) in enumerate(edges):
                d = temporal_distance(intervals[u], intervals[v])
                t4[row] = d.as_tuple()
                edist[row] = math.hypot(d.ds, d.de)
            instances.append(GraphInstance(
                video_id=video_id,
                target_event_id=pair.target_event_id,
                feats=feats[:t_idx],
                target_feat=feats[t_idx],
                labels=labels,
                src=src,
                dst=dst,
                t4=t4,
                edist=edist,
                premise_event_ids=[e.event_id for e in premises],
                premise_types=[e.interaction_type for e in premises],
            ))
    return instances


@dataclass
class TrainedModel:
    params: ModelParams
    config: ModelConfig
    scaler: FeatureScaler
    name: str = "relnet"

    def scores(self, inst: GraphInstance) -> np.ndarray:
        return forward(inst, self.params, self.config).probabilities


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    model: TrainedModel
    curve: list[EpochStats]
    best_epoch: int


class Adam:
    """Standard Adam on the flattened parameter vector."""

    def __init__(self, size: int, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return theta - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def top1_accuracy(instances: list[GraphInstance], score_fn) -> float:
    """Percent of instances whose best-scoring premise is a true trigger.

    Ties go to the earliest premise (they are stored in temporal order),
    then the lowest event id, which index order already encodes.
    """
    if not instances:
        return 0.0
    correct = 0
    for inst in instances:
        scores = np.asarray(score_fn(inst), dtype=np.float64)
        best = max(range(inst.n_nodes), key=lambda i: (scores[i], -i))
        correct += int(inst.labels[best] == 1.0)
    return 100.0 * correct / len(instances)


def train(dataset: DatasetBundle, config: TrainConfig) -> TrainResult:
    """Adam-trained model with per-epoch learning-rate decay.

    Deterministic for a fixed seed; retains the parameters of the epoch
    with the best validation accuracy (the initial parameters when
    epochs == 0 or nothing improves).
    """
    scaler = fit_scaler(dataset)
    train_insts = build_instances(dataset, "train", scaler, config.window)
    val_insts = build_instances(dataset, "val", scaler, config.window)
    if not train_insts:
        raise ValueError("empty training split")

    model_config = config.model_config(dataset.feature_dim)
    mean_dist = _mean_edge_distance(train_insts)
    params = init_params(model_config, config.seed, mean_dist)
    theta = flatten_params(params)
    adam = Adam(theta.size)
    rng = np.random.default_rng(config.seed)

    curve: list[EpochStats] = []
    best_theta = theta.copy()
    best_acc = -1.0
    best_epoch = 0
    lr = config.learning_rate
    stale = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_insts))
        losses = []
        for step, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [train_insts[i] for i in order[start:start + config.batch_size]]
            params = unflatten_params(theta, params)
            loss, grads = gradients(batch, params, model_config,
                                    pos_weight=config.positive_weight)
            grad_vec = flatten_params(grads)
            if not (np.isfinite(loss) and np.isfinite(grad_vec).all()):
                raise TrainingDivergedError(epoch, step, loss)
            theta = adam.step(theta, grad_vec, lr)
            losses.append(loss)
        lr *= config.lr_decay
        params = unflatten_params(theta, params)
        model = TrainedModel(params, model_config, scaler)
        val_acc = top1_accuracy(val_insts, model.scores)
        curve.append(EpochStats(epoch, float(np.mean(losses)), val_acc))
        if val_acc > best_acc:
            best_acc, best_theta, best_epoch = val_acc, theta.copy(), epoch
            stale = 0
        else:
            stale += 1
            if config.early_stop_patience is not None and stale >= config.early_stop_patience:
                break

    final_params = unflatten_params(best_theta, params)
    return TrainResult(TrainedModel(final_params, model_config, scaler), curve, best_epoch)


def _mean_edge_distance(instances: list[GraphInstance]) -> float:
    total, count = 0.0, 0
    for inst in instances:
        total += float(inst.edist.sum())
        count += len(inst.edist)
    return total / count if count else 3.0
