import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from triggerkit.allen import precedes, temporal_distance
from triggerkit.events import Event
from triggerkit.relations import (NoPremiseError, RelationParams, build_premise_graph,
                                  combine_relation, decay_factor, edge_feature,
                                  premise_edges, semantic_relation)


def _params(d=2, k=None, raw_decay=0.0, w_t=None, b_t=0.0, bilinear=None, bias=None):
    k = k or d
    return RelationParams(
        bilinear=np.zeros((d, d, k)) if bilinear is None else np.asarray(bilinear, float),
        bias=np.zeros(k) if bias is None else np.asarray(bias, float),
        raw_decay=raw_decay,
        temporal_weights=np.zeros(4) if w_t is None else np.asarray(w_t, float),
        temporal_bias=b_t,
    )


def _event(event_id, ts, te, feats):
    return Event(event_id, 1, 2, "collision", ts, te, np.asarray(feats, float))


def test_zero_distance_gives_unit_decay():
    assert decay_factor((1.0, 3.0), (1.0, 3.0), decay_rate=2.5) == 1.0


def test_zero_tensor_gives_zero_relation():
    params = _params(d=3)
    sem = semantic_relation(np.ones(3), np.ones(3), (0.0, 1.0), (2.0, 3.0), params)
    assert np.all(sem == 0.0)


def test_bilinear_matches_slicewise_loops():
    rng = np.random.default_rng(0)
    d = 2
    w = rng.normal(size=(d, d, d))
    b = rng.normal(size=d)
    raw_decay = math.log(0.7)
    params = _params(d=d, bilinear=w, bias=b, raw_decay=raw_decay)
    ei = rng.normal(size=d)
    ej = rng.normal(size=d)
    ivl_i, ivl_j = (0.5, 1.5), (2.0, 4.0)
    got = semantic_relation(ei, ej, ivl_i, ivl_j, params)
    dist = math.hypot(2.0 - 0.5, 4.0 - 1.5)
    gamma = math.exp(-0.7 * dist)
    for s in range(d):
        acc = 0.0
        for p in range(d):
            for q in range(d):
                acc += ei[p] * w[p, q, s] * ej[q]
        assert abs(got[s] - gamma * math.tanh(acc + b[s])) < 1e-10


def test_dimension_mismatch_rejected():
    params = _params(d=3)
    with pytest.raises(ValueError):
        semantic_relation(np.ones(2), np.ones(3), (0, 1), (1, 2), params)


def test_combine_zero_weights_halves():
    params = _params(d=2)
    sem = np.array([0.4, -0.2])
    d4 = temporal_distance((0.0, 1.0), (2.0, 3.0))
    out = combine_relation(d4, sem, params)
    assert out.r_temp == 0.5
    assert np.allclose(out.combined, 0.5 * sem, atol=1e-15)


def test_combine_zero_semantics_zero_everywhere():
    params = _params(d=2, w_t=[1.0, -2.0, 0.5, 0.3], b_t=0.7)
    d4 = temporal_distance((0.0, 1.0), (2.0, 5.0))
    out = combine_relation(d4, np.zeros(2), params)
    assert np.all(out.combined == 0.0)


def test_combine_matches_scripted_arithmetic():
    w_t = [0.2, -0.1, 0.05, 0.3]
    b_t = -0.4
    params = _params(d=2, w_t=w_t, b_t=b_t)
    ivl_i, ivl_j = (1.0, 2.5), (3.0, 4.0)
    d4 = temporal_distance(ivl_i, ivl_j)
    sem = np.array([0.3, -0.6])
    out = combine_relation(d4, sem, params)
    z = sum(w * x for w, x in zip(w_t, d4.as_tuple())) + b_t
    expected_temp = 1.0 / (1.0 + math.exp(-z))
    assert abs(out.r_temp - expected_temp) < 1e-12
    assert np.max(np.abs(out.combined - expected_temp * sem)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 5.0),
       st.one_of(st.just(0.0), st.floats(1e-6, 20.0)),
       st.one_of(st.just(0.0), st.floats(1e-6, 20.0)))
def test_decay_in_unit_interval_and_monotone(beta, d1, d2):
    g1 = math.exp(-beta * d1)
    g2 = math.exp(-beta * d2)
    assert 0.0 < g1 <= 1.0
    if d1 < d2:
        assert g1 > g2
    assert (g1 == 1.0) == (d1 == 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_semantic_bounded_by_decay_and_combined_in_unit_ball(seed):
    rng = np.random.default_rng(seed)
    d = 3
    params = _params(
        d=d, bilinear=rng.normal(size=(d, d, d)), bias=rng.normal(size=d),
        raw_decay=float(rng.normal(scale=0.5)),
        w_t=rng.normal(size=4), b_t=float(rng.normal()),
    )
    ei, ej = rng.normal(size=d), rng.normal(size=d)
    ivl_i = (rng.uniform(0, 5), 0.0)
    ivl_i = (ivl_i[0], ivl_i[0] + rng.uniform(0.1, 3))
    ivl_j = (rng.uniform(0, 5), 0.0)
    ivl_j = (ivl_j[0], ivl_j[0] + rng.uniform(0.1, 3))
    gamma = decay_factor(ivl_i, ivl_j, params.decay_rate)
    sem = semantic_relation(ei, ej, ivl_i, ivl_j, params)
    assert np.all(np.abs(sem) <= gamma + 1e-12)
    out = combine_relation(temporal_distance(ivl_i, ivl_j), sem, params)
    assert np.all(np.abs(out.combined) < 1.0)


def _events_at(times):
    d = 4
    return [
        _event(i + 1, ts, te, np.linspace(0.1 * (i + 1), 0.2 * (i + 1), d))
        for i, (ts, te) in enumerate(times)
    ]


def test_full_dag_edge_count():
    events = _events_at([(0.0, 0.4), (0.5, 1.0), (1.2, 2.0), (2.5, 3.0)])
    graph = build_premise_graph(events, target_index=4, params=_params(d=4))
    assert len(graph.premises) == 3
    assert len(graph.edges) == 3  # C(3, 2)
    assert len(graph.edge_features) == 3


def test_window_pruning():
    events = _events_at([(0.0, 0.4), (0.5, 1.0), (3.0, 3.5), (4.0, 5.0)])
    graph = build_premise_graph(events, target_index=4, params=_params(d=4), window=1.0)
    kept = {(graph.premises[u].event_id, graph.premises[v].event_id)
            for u, v in graph.edges}
    assert kept == {(1, 2)}


def test_single_premise_graph():
    events = _events_at([(0.0, 0.4), (0.5, 1.0)])
    graph = build_premise_graph(events, target_index=2, params=_params(d=4))
    assert len(graph.premises) == 1
    assert graph.edges == []


def test_no_premise_error():
    events = _events_at([(0.0, 0.4), (0.5, 1.0)])
    with pytest.raises(NoPremiseError):
        build_premise_graph(events, target_index=1, params=_params(d=4))


def test_premise_edges_point_forward_in_interval_order():
    events = _events_at([(0.0, 2.0), (0.3, 0.8), (1.0, 1.5), (2.5, 3.0), (3.5, 4.0)])
    graph = build_premise_graph(events, target_index=5, params=_params(d=4))
    for u, v in graph.edges:
        eu, ev = graph.premises[u], graph.premises[v]
        assert precedes(eu.interval(), ev.interval(), eu.event_id, ev.event_id)
    # and every premise precedes the target
    for e in graph.premises:
        assert precedes(e.interval(), graph.target.interval(), e.event_id,
                        graph.target.event_id)


def test_edge_feature_consistency_with_parts():
    rng = np.random.default_rng(3)
    d = 4
    params = _params(d=d, bilinear=rng.normal(size=(d, d, d)),
                     bias=rng.normal(size=d), raw_decay=-0.3,
                     w_t=rng.normal(size=4), b_t=0.2)
    events = _events_at([(0.0, 0.4), (0.5, 1.0)])
    feat = edge_feature(events[0], events[1], params)
    sem = semantic_relation(events[0].features, events[1].features,
                            events[0].interval(), events[1].interval(), params)
    assert np.allclose(feat.r_sem, sem)
    assert np.allclose(feat.combined, feat.r_temp * sem)
