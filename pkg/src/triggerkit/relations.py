"""Edge features between events: temporal weights, bilinear semantics, decay.

An edge from event u to event v carries a combined feature
r_uv = r_temp(u, v) * r_sem(u, v), where r_temp is a learnable sigmoid
projection of the four temporal distances (a scalar in (0, 1)) and r_sem
is a per-slice bilinear form squashed by tanh and damped by
gamma = exp(-beta * d) with d the Euclidean distance between the two
(start, end) pairs.  The decay rate beta stays positive through an
exponential reparameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allen import TemporalDistance, temporal_distance
from .events import Event


class NoPremiseError(ValueError):
    pass


@dataclass
class RelationParams:
    bilinear: np.ndarray        # (d, d, k) slice-wise bilinear tensor
    bias: np.ndarray            # (k,)
    raw_decay: float            # decay rate is exp(raw_decay)
    temporal_weights: np.ndarray  # (4,)
    temporal_bias: float

    @property
    def decay_rate(self) -> float:
        return math.exp(self.raw_decay)

    @property
    def k(self) -> int:
        return self.bilinear.shape[2]


@dataclass
class EdgeFeature:
    r_temp: float
    r_sem: np.ndarray
    combined: np.ndarray


def interval_distance(interval_i: tuple[float, float],
                      interval_j: tuple[float, float]) -> float:
    """Euclidean distance between (start, end) pairs."""
    return math.hypot(interval_j[0] - interval_i[0], interval_j[1] - interval_i[1])


def decay_factor(interval_i, interval_j, decay_rate: float) -> float:
    return math.exp(-decay_rate * interval_distance(interval_i, interval_j))


def semantic_relation(feat_i: np.ndarray, feat_j: np.ndarray,
                      interval_i, interval_j, params: RelationParams,
                      distance_penalty: bool = True) -> np.ndarray:
    """Damped bilinear relation vector, one tanh slice per output dimension."""
    d = params.bilinear.shape[0]
    if feat_i.shape != (d,) or feat_j.shape != (d,):
        raise ValueError(f"feature dimension mismatch: expected ({d},)")
    slices = np.einsum("p,pqk,q->k", feat_i, params.bilinear, feat_j)
    gamma = decay_factor(interval_i, interval_j, params.decay_rate) if distance_penalty else 1.0
    return gamma * np.tanh(slices + params.bias)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def combine_relation(tdist: TemporalDistance, sem: np.ndarray,
                     params: RelationParams) -> EdgeFeature:
    """Scalar temporal weight in (0, 1) broadcast onto the semantic vector."""
    r_temp = _sigmoid(float(np.dot(params.temporal_weights, tdist.as_tuple()))
                      + params.temporal_bias)
    return EdgeFeature(r_temp, sem, r_temp * sem)


def edge_feature(event_u: Event, event_v: Event, params: RelationParams,
                 distance_penalty: bool = True) -> EdgeFeature:
    sem = semantic_relation(event_u.features, event_v.features,
                            event_u.interval(), event_v.interval(),
                            params, distance_penalty)
    return combine_relation(temporal_distance(event_u.interval(), event_v.interval()),
                            sem, params)


def premise_edges(intervals: list[tuple[float, float]],
                  window: float | None = None) -> list[tuple[int, int]]:
    """Directed edges over order-sorted premise events.

    Full DAG over all ordered pairs by default; a window keeps only pairs
    whose start times lie within `window` seconds of each other.
    """
    edges = []
    for i in range(len(intervals)):
        for j in range(i + 1, len(intervals)):
            if window is not None and abs(intervals[j][0] - intervals[i][0]) > window:
                continue
            edges.append((i, j))
    return edges


@dataclass
class PremiseGraph:
    premises: list[Event]                 # order-sorted events preceding the target
    target: Event
    edges: list[tuple[int, int]]          # indices into premises, u precedes v
    edge_features: list[EdgeFeature]


def build_premise_graph(events: list[Event], target_index: int,
                        params: RelationParams, window: float | None = None,
                        distance_penalty: bool = True) -> PremiseGraph:
    """Premise graph for the target at 1-based position target_index.

    Nodes are the events preceding the target in the interval order; every
    ordered pair becomes an edge (optionally window-pruned) carrying an
    EdgeFeature computed with the given parameters.
    """
    if target_index < 2:
        raise NoPremiseError("target has no premise events")
    if target_index > len(events):
        raise ValueError("target index beyond the event list")
    ordered = sorted(events, key=Event.sort_key)
    premises = ordered[:target_index - 1]
    target = ordered[target_index - 1]
    edges = premise_edges([e.interval() for e in premises], window)
    features = [edge_feature(premises[u], premises[v], params, distance_penalty)
                for u, v in edges]
    return PremiseGraph(premises, target, edges, features)
