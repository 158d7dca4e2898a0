"""Ground-truth trigger labels via counterfactual re-simulation.

For each video, every dynamic object is removed in turn and the scene is
re-simulated.  A target event survives a removal when the counterfactual
event graph contains an event with the same participants and type at
nearly the same time and place; objects whose removal makes the target
vanish are "affecting".  Each affecting object contributes one candidate
trigger: the first event in its chain with a dynamic counterpart (falling
back to its first event), kept only when a directed path connects the
chain head to the target and the candidate precedes the target.
"""

from __future__ import annotations

from dataclasses import dataclass

from .events import Event, EventGraph, Thresholds, event_mean_position, extract_video_events
from .allen import precedes
from .physics import SimResult, SimulationError, simulate
from .rng import SplitMix64, derive_seed
from .scene import (N_LAYOUTS, SceneSpec, UnplaceableSceneError, WorldConfig,
                    build_scene, remove_object)

PATH_CAP = 10_000
_SCENE_RETRIES = 20
_SPLIT_KEY = 0x5EED5417


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class Tolerances:
    time_tol: float = 0.3    # seconds, on both start and end times
    space_tol: float = 10.0  # world units, main-object mean position


@dataclass(frozen=True)
class TargetMatch:
    original_event_id: int
    matched_event_id: int | None
    attributes_equal: bool
    dts: float | None = None
    dte: float | None = None
    distance: float | None = None


@dataclass(frozen=True)
class TriggerTargetPair:
    video_id: int
    target_event_id: int
    trigger_event_ids: frozenset[int]
    affecting_object_ids: frozenset[int]
    path_truncated: bool = False

    def __post_init__(self):
        if not self.trigger_event_ids:
            raise ValueError("trigger set must be non-empty")


# --------------------------------------------------------------------------
# Path enumeration


def dfs_all_paths(graph: EventGraph, src: int, dst: int,
                  cap: int = PATH_CAP) -> list[list[int]]:
    """All simple directed paths src -> dst, in lexicographic node order.

    src == dst yields the single zero-length path.  Enumeration stops at
    `cap` paths; callers detect truncation by len(result) == cap.
    """
    if src not in graph.events or dst not in graph.events:
        raise KeyError("src and dst must be nodes of the graph")
    paths: list[list[int]] = []
    trail = [src]
    on_trail = {src}

    def _walk(u: int) -> None:
        if len(paths) >= cap:
            return
        if u == dst:
            paths.append(list(trail))
            return
        for v in graph.adjacency.get(u, ()):
            if v in on_trail or len(paths) >= cap:
                continue
            trail.append(v)
            on_trail.add(v)
            _walk(v)
            trail.pop()
            on_trail.remove(v)

    _walk(src)
    return paths


# --------------------------------------------------------------------------
# Counterfactual matching


def find_target_match(target: Event, counterfactual: EventGraph,
                      tolerances: Tolerances) -> TargetMatch:
    """Best surviving counterpart of the target, or a no-match record.

    A counterpart must share (main id, partner id, interaction type) and
    stay within the time and space tolerances; among several, the one
    with the smallest time then space discrepancy wins.
    """
    target_pos = event_mean_position(target)
    best: tuple | None = None
    for event in counterfactual.sorted_events():
        if (event.main_object_id != target.main_object_id
                or event.partner_id != target.partner_id
                or event.interaction_type != target.interaction_type):
            continue
        dts = abs(event.ts - target.ts)
        dte = abs(event.te - target.te)
        if dts > tolerances.time_tol or dte > tolerances.time_tol:
            continue
        dist = float(((event_mean_position(event) - target_pos) ** 2).sum() ** 0.5)
        if dist > tolerances.space_tol:
            continue
        key = (dts, dte, dist, event.event_id)
        if best is None or key < best[0]:
            best = (key, event, dts, dte, dist)
    if best is None:
        return TargetMatch(target.event_id, None, False)
    _, event, dts, dte, dist = best
    return TargetMatch(target.event_id, event.event_id, True, dts, dte, dist)


def match_target(target: Event, counterfactual: EventGraph,
                 tolerances: Tolerances) -> int | None:
    return find_target_match(target, counterfactual, tolerances).matched_event_id


# --------------------------------------------------------------------------
# Per-video labeling


@dataclass
class LabelingContext:
    """One video plus the event graphs of all its counterfactual variants."""

    sim: SimResult
    events: list[Event]
    graph: EventGraph
    thresholds: Thresholds
    tolerances: Tolerances
    counterfactual_graphs: dict[int, EventGraph]


def build_labeling_context(sim: SimResult, thresholds: Thresholds | None = None,
                           tolerances: Tolerances | None = None) -> LabelingContext:
    thresholds = thresholds or Thresholds()
    tolerances = tolerances or Tolerances()
    events, graph = extract_video_events(sim, thresholds)
    counterfactuals: dict[int, EventGraph] = {}
    for object_id in sorted(sim.scene.dynamic_ids()):
        variant = remove_object(sim.scene, object_id)
        _, cf_graph = extract_video_events(simulate(variant, sim.config), thresholds)
        counterfactuals[object_id] = cf_graph
    return LabelingContext(sim, events, graph, thresholds, tolerances, counterfactuals)


def find_affecting_objects(ctx: LabelingContext, target: Event) -> set[int]:
    """Objects whose removal eliminates the target from the re-simulation."""
    if target.event_id not in ctx.graph.events:
        raise KeyError("target is not an event of this video")
    return {
        object_id
        for object_id, cf_graph in ctx.counterfactual_graphs.items()
        if match_target(target, cf_graph, ctx.tolerances) is None
    }


def _first_dynamic_partner_event(graph: EventGraph, object_id: int) -> int:
    chain = graph.chains[object_id]
    for event_id in chain:
        event = graph.events[event_id]
        if event.main_object_id == object_id:
            if event.has_dynamic_partner():
                return event_id
        else:
            return event_id  # object appears as partner: counterpart is dynamic
    return chain[0]


def extract_trigger_pairs(graph: EventGraph, target: Event, affecting: set[int],
                          video_id: int = -1) -> TriggerTargetPair | None:
    """Trigger set for one target given its affecting objects.

    For each affecting object with a path from its chain head to the
    target, the candidate is its first dynamic-counterpart event (its
    first event when none exists).  Candidates that do not precede the
    target are discarded; an empty final set drops the pair.
    """
    if target.event_id not in graph.events:
        raise KeyError("target is not a node of the event graph")
    if not affecting:
        raise ValueError("affecting set must be non-empty")
    triggers: list[int] = []
    truncated = False
    for object_id in sorted(affecting):
        chain = graph.chains.get(object_id)
        if not chain:
            continue
        paths = dfs_all_paths(graph, chain[0], target.event_id)
        if len(paths) >= PATH_CAP:
            truncated = True
        if not paths:
            continue
        candidate = _first_dynamic_partner_event(graph, object_id)
        if candidate not in triggers:
            triggers.append(candidate)
    kept = frozenset(
        t for t in triggers
        if t != target.event_id
        and precedes(graph.events[t].interval(), target.interval(), t, target.event_id)
    )
    if not kept:
        return None
    return TriggerTargetPair(video_id, target.event_id, kept,
                             frozenset(affecting), truncated)


def label_video(ctx: LabelingContext, video_id: int) -> list[TriggerTargetPair]:
    """Trigger-target pairs for every target with at least one premise event."""
    ordered = sorted(ctx.events, key=Event.sort_key)
    pairs: list[TriggerTargetPair] = []
    for index, target in enumerate(ordered):
        if index == 0:
            continue  # no premise events: exogenous by construction
        affecting = find_affecting_objects(ctx, target)
        if not affecting:
            continue
        pair = extract_trigger_pairs(ctx.graph, target, affecting, video_id)
        if pair is not None:
            pairs.append(pair)
    return pairs


# --------------------------------------------------------------------------
# Dataset assembly


@dataclass
class VideoData:
    video_id: int
    scene: SceneSpec
    config: WorldConfig
    events: list[Event]
    pairs: list[TriggerTargetPair]
    sim: SimResult | None = None


@dataclass
class DatasetBundle:
    seed: int
    feature_dim: int
    world: WorldConfig
    thresholds: Thresholds
    tolerances: Tolerances
    videos: dict[int, VideoData]
    splits: dict[str, list[int]]
    n_requested: int

    def pairs_of(self, split: str) -> list[TriggerTargetPair]:
        return [p for vid in self.splits[split] for p in self.videos[vid].pairs]

    def pair_counts(self) -> dict[str, int]:
        return {name: len(self.pairs_of(name)) for name in ("train", "val", "test")}


def split_video_ids(video_ids: list[int], seed: int) -> dict[str, list[int]]:
    """Deterministic 60:20:20 split by video (floored train/val, rest test)."""
    ids = sorted(video_ids)
    SplitMix64(derive_seed(seed, _SPLIT_KEY)).shuffle(ids)
    n = len(ids)
    n_train = int(n * 0.6)
    n_val = int(n * 0.2)
    return {
        "train": sorted(ids[:n_train]),
        "val": sorted(ids[n_train:n_train + n_val]),
        "test": sorted(ids[n_train + n_val:]),
    }


def generate_video(video_id: int, seed: int, world: WorldConfig,
                   thresholds: Thresholds, tolerances: Tolerances,
                   keep_sim: bool = False,
                   layout_ids: tuple[int, ...] | None = None) -> VideoData:
    """Simulate, extract and label one video, retrying unplaceable seeds."""
    cycle = layout_ids or tuple(range(1, N_LAYOUTS + 1))
    layout_id = cycle[video_id % len(cycle)]
    last_error: Exception | None = None
    for attempt in range(_SCENE_RETRIES):
        video_seed = derive_seed(seed, video_id, attempt)
        try:
            scene = build_scene(layout_id, video_seed)
            sim = simulate(scene, world)
        except (UnplaceableSceneError, SimulationError) as err:
            last_error = err
            continue
        ctx = build_labeling_context(sim, thresholds, tolerances)
        return VideoData(video_id, scene, world, ctx.events,
                         label_video(ctx, video_id), sim if keep_sim else None)
    raise DatasetError(f"video {video_id}: no placeable scene in "
                       f"{_SCENE_RETRIES} attempts ({last_error})")


def build_dataset(n_videos: int, seed: int, world: WorldConfig | None = None,
                  thresholds: Thresholds | None = None,
                  tolerances: Tolerances | None = None,
                  keep_sims: bool = False, n_jobs: int = 1,
                  layout_ids: tuple[int, ...] | None = None) -> DatasetBundle:
    """Generate n_videos videos, drop pairless ones, split 60:20:20.

    Videos share nothing and are keyed by their own derived seeds, so
    n_jobs > 1 farms them out to worker processes without changing the
    result; the merge is ordered by video id.
    """
    if n_videos < 5:
        raise DatasetError("need at least 5 videos")
    if layout_ids:
        bad = [l for l in layout_ids if not 1 <= l <= N_LAYOUTS]
        if bad:
            raise DatasetError(f"invalid layout ids {bad}")
    world = world or WorldConfig()
    thresholds = thresholds or Thresholds()
    tolerances = tolerances or Tolerances()
    videos: dict[int, VideoData] = {}
    if n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        worker = partial(generate_video, seed=seed, world=world,
                         thresholds=thresholds, tolerances=tolerances,
                         keep_sim=keep_sims, layout_ids=layout_ids)
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(worker, range(n_videos), chunksize=8))
    else:
        results = [generate_video(video_id, seed, world, thresholds, tolerances,
                                  keep_sims, layout_ids) for video_id in range(n_videos)]
    for data in sorted(results, key=lambda v: v.video_id):
        if data.pairs:
            videos[data.video_id] = data
    if len(videos) < 5:
        raise DatasetError(f"only {len(videos)} usable videos out of {n_videos}")
    from .events import EVENT_FEATURE_DIM

    return DatasetBundle(seed, EVENT_FEATURE_DIM, world, thresholds, tolerances,
                         videos, split_video_ids(list(videos), seed), n_videos)


def verify_video_soundness(bundle: DatasetBundle, video_id: int) -> list[TriggerTargetPair]:
    """Re-run the construction check for one video; returns unsound pairs.

    Every pair must lose its target under removal of each of its affecting
    objects.  Counterfactual graphs are re-simulated once per removed
    object and shared across the video's pairs.
    """
    data = bundle.videos[video_id]
    events_by_id = {e.event_id: e for e in data.events}
    needed = sorted({o for p in data.pairs for o in p.affecting_object_ids})
    cf_graphs: dict[int, EventGraph] = {}
    for object_id in needed:
        variant = remove_object(data.scene, object_id)
        _, cf_graphs[object_id] = extract_video_events(simulate(variant, data.config),
                                                       bundle.thresholds)
    unsound = []
    for pair in data.pairs:
        target = events_by_id[pair.target_event_id]
        for object_id in sorted(pair.affecting_object_ids):
            if match_target(target, cf_graphs[object_id], bundle.tolerances) is not None:
                unsound.append(pair)
                break
    return unsound
