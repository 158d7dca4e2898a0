"""Shared scripted scenes and dataset fixtures."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from triggerkit.geometry import Polygon, Vec2

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")
from triggerkit.labeling import Tolerances, build_dataset
from triggerkit.scene import (STATIC_ID_BASE, DynamicObjectSpec, SceneSpec,
                              StaticElement, WorldConfig)


def boundary_elements():
    from triggerkit.scene import _boundary_elements

    return _boundary_elements()


def custom_scene(objects, extra_elements=(), layout_id=1, seed=0) -> SceneSpec:
    """Hand-built scene: world boundary plus the given pieces."""
    elements = tuple(boundary_elements()) + tuple(extra_elements)
    return SceneSpec(layout_id, seed, tuple(objects), elements)


def circle(object_id, x, y, vx=0.0, vy=0.0, size="small", color=0):
    return DynamicObjectSpec(object_id, "circle", size, color,
                             Vec2(float(x), float(y)), Vec2(float(vx), float(vy)))


def no_gravity(duration=3.0, restitution=0.8):
    return WorldConfig(gravity=0.0, restitution=restitution,
                       restitution_static=0.5, friction=0.3,
                       duration=duration)


def chain_scene():
    """A pushes B pushes C into the right wall; three-collision cascade.

    A (small) moves right at 120 into resting large B, which rolls into
    resting small C, which bounces off the right wall.
    """
    objects = [
        circle(1, 40.0, 128.0, vx=120.0),
        circle(2, 120.0, 128.0, size="large", color=1),
        circle(3, 190.0, 128.0, color=2),
    ]
    return custom_scene(objects), no_gravity(duration=3.0)


def two_cluster_scene():
    """Two non-interacting pairs on separate horizontal lanes."""
    objects = [
        circle(1, 40.0, 60.0, vx=80.0),
        circle(2, 120.0, 60.0, color=1),
        circle(3, 60.0, 180.0, vx=70.0, color=2),
        circle(4, 150.0, 180.0, color=3),
    ]
    return custom_scene(objects), no_gravity(duration=3.0)


def ramp_element(element_id=STATIC_ID_BASE + 3):
    """30-degree ramp whose slope gives roughly a two-second slide."""
    verts = ((30.0, 8.0), (196.0, 8.0), (30.0, 104.0))
    cx = sum(v[0] for v in verts) / 3.0
    cy = sum(v[1] for v in verts) / 3.0
    local = tuple((vx - cx, vy - cy) for vx, vy in verts)
    return StaticElement(element_id, "ramp", ((Polygon(local), cx, cy),))


@pytest.fixture(scope="session")
def toy_dataset():
    """Small generated dataset shared by training/evaluation tests."""
    return build_dataset(12, seed=11, n_jobs=1)


@pytest.fixture(scope="session")
def toy_instances(toy_dataset):
    from triggerkit.training import build_instances, fit_scaler

    scaler = fit_scaler(toy_dataset)
    return {
        split: build_instances(toy_dataset, split, scaler)
        for split in ("train", "val", "test")
    }


def synthetic_instance(rng: np.random.Generator, n_premises=5, d=8,
                       n_triggers=1, video_id=0, window=None):
    """Random premise graph with well-separated intervals."""
    from triggerkit.allen import temporal_distance
    from triggerkit.model import GraphInstance
    from triggerkit.relations import premise_edges
    import math

    feats = rng.normal(scale=0.6, size=(n_premises, d))
    target = rng.normal(scale=0.6, size=d)
    labels = np.zeros(n_premises)
    for idx in rng.choice(n_premises, size=min(n_triggers, n_premises), replace=False):
        labels[idx] = 1.0
    intervals = []
    t = 0.0
    for _ in range(n_premises):
        start = t + rng.uniform(0.05, 0.4)
        end = start + rng.uniform(0.3, 1.2)
        intervals.append((start, end))
        t = start
    intervals.sort(key=lambda iv: (iv[1], -iv[0]))
    edges = premise_edges(intervals, window)
    edges.sort(key=lambda uv: (uv[1], uv[0]))
    t4 = np.zeros((len(edges), 4))
    edist = np.zeros(len(edges))
    for row, (u, v) in enumerate(edges):
        dd = temporal_distance(intervals[u], intervals[v])
        t4[row] = dd.as_tuple()
        edist[row] = math.hypot(dd.ds, dd.de)
    return GraphInstance(
        video_id=video_id, target_event_id=-1, feats=feats, target_feat=target,
        labels=labels, src=np.array([u for u, _ in edges], dtype=np.intp),
        dst=np.array([v for _, v in edges], dtype=np.intp), t4=t4, edist=edist,
        premise_event_ids=list(range(1, n_premises + 1)),
        premise_types=["collision"] * n_premises,
    )
