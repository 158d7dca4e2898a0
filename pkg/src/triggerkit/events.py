"""Event extraction: interactions, segmentation, features, event graph.

The chain from raw trajectories to events:

1. state changes: per-step velocity deltas measured against the ballistic
   prediction (gravity while airborne, nothing while supported), so pure
   free fall and steady rest never fire;
2. interactions: contiguous contact episodes between a pair, kept only
   when a participant shows a state change within the proximity window,
   and typed collision/slide by episode length and tangential speed;
3. events: per object, the spans between interactions that changed that
   object's movement direction;
4. per-event feature vectors and a directed event graph whose per-object
   chains merge at two-dynamic-object events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allen import angle_between, order_key
from .physics import SimResult
from .scene import ELEMENT_KINDS, N_COLORS, SHAPES, SIZES, is_dynamic_id

PARTNER_CLASSES = ("dynamic",) + ELEMENT_KINDS

#: Per-timestep object feature layout: position, velocity, then one-hot
#: shape, size, color and object class blocks.
OBJECT_FEATURE_DIM = 2 + 2 + len(SHAPES) + len(SIZES) + N_COLORS + len(PARTNER_CLASSES)
EVENT_FEATURE_DIM = 2 * OBJECT_FEATURE_DIM + 2

_POS = slice(0, 2)


@dataclass(frozen=True)
class Thresholds:
    delta_v: float = 5.0                 # units/s of unexplained velocity change
    delta_heading_deg: float = 10.0
    speed_floor: float = 3.0             # headings below this speed are noise
    proximity_steps: int = 2
    contact_tol: float = 0.5
    slide_min_steps: int = 5
    slide_tangential_speed: float = 1.0
    episode_gap: int = 2


@dataclass(frozen=True)
class StateChange:
    object_id: int
    timestep: int
    delta_speed: float
    delta_heading: float


@dataclass(frozen=True)
class Interaction:
    id_a: int
    id_b: int
    interaction_type: str   # "collision" | "slide"
    timestep_start: int
    timestep_end: int

    def __post_init__(self):
        if self.id_a == self.id_b:
            raise ValueError("interaction needs two distinct participants")
        if self.timestep_start > self.timestep_end:
            raise ValueError("interaction ends before it starts")

    def involves(self, ident: int) -> bool:
        return ident in (self.id_a, self.id_b)

    def partner_of(self, ident: int) -> int:
        return self.id_b if ident == self.id_a else self.id_a


@dataclass(eq=False)
class Event:
    event_id: int
    main_object_id: int
    partner_id: int
    interaction_type: str
    ts: float
    te: float
    features: np.ndarray | None = None

    def interval(self) -> tuple[float, float]:
        return (self.ts, self.te)

    def sort_key(self):
        return order_key(self.interval(), self.event_id)

    def has_dynamic_partner(self) -> bool:
        return is_dynamic_id(self.partner_id)


@dataclass
class EventGraph:
    events: dict[int, Event]
    chains: dict[int, list[int]]          # object id -> event ids in chain order
    adjacency: dict[int, list[int]]       # event id -> sorted successor event ids

    def edge_list(self) -> list[tuple[int, int]]:
        return [(u, v) for u in sorted(self.adjacency) for v in self.adjacency[u]]

    def sorted_events(self) -> list[Event]:
        return sorted(self.events.values(), key=Event.sort_key)


# --------------------------------------------------------------------------
# State changes


def _ballistic_prediction(contacts: frozenset[int], gravity: float, dt: float):
    if contacts:
        return (0.0, 0.0)
    return (0.0, -gravity * dt)


def detect_state_changes(sim: SimResult, thresholds: Thresholds) -> list[StateChange]:
    """Per-step unexplained velocity changes exceeding the thresholds."""
    g, dt = sim.config.gravity, sim.config.dt
    theta = math.radians(thresholds.delta_heading_deg)
    changes: list[StateChange] = []
    for ident in sorted(sim.trajectories):
        traj = sim.trajectories[ident]
        vel = traj.velocities
        for k in range(1, len(vel)):
            px, py = _ballistic_prediction(traj.contacts[k - 1], g, dt)
            dvx = vel[k, 0] - vel[k - 1, 0] - px
            dvy = vel[k, 1] - vel[k - 1, 1] - py
            delta_speed = math.hypot(dvx, dvy)
            cx, cy = vel[k, 0] - px, vel[k, 1] - py
            if (math.hypot(*vel[k - 1]) >= thresholds.speed_floor
                    and math.hypot(cx, cy) >= thresholds.speed_floor):
                delta_heading = angle_between(vel[k - 1, 0], vel[k - 1, 1], cx, cy)
            else:
                delta_heading = 0.0
            if delta_speed > thresholds.delta_v or delta_heading > theta:
                changes.append(StateChange(ident, k, delta_speed, delta_heading))
    return changes


# --------------------------------------------------------------------------
# Interactions


def _contact_episodes(contact_log, gap: int):
    """Group the contact log into per-pair maximal episodes of timesteps."""
    by_pair: dict[tuple[int, int], list] = {}
    for rec in contact_log:
        by_pair.setdefault((rec.id_a, rec.id_b), []).append(rec)
    episodes = []
    for pair in sorted(by_pair):
        records = by_pair[pair]
        start = prev = records[0].timestep
        bucket = [records[0]]
        for rec in records[1:]:
            if rec.timestep - prev <= gap + 1:
                bucket.append(rec)
                prev = rec.timestep
            else:
                episodes.append((pair, start, prev, bucket))
                start = prev = rec.timestep
                bucket = [rec]
        episodes.append((pair, start, prev, bucket))
    episodes.sort(key=lambda e: (e[1], e[0]))
    return episodes


def _mean_tangential_speed(pair, records, sim: SimResult) -> float:
    id_a, id_b = pair
    total = 0.0
    for rec in records:
        va = sim.trajectories[id_a].velocities[rec.timestep] if is_dynamic_id(id_a) else (0.0, 0.0)
        vb = sim.trajectories[id_b].velocities[rec.timestep] if is_dynamic_id(id_b) else (0.0, 0.0)
        rvx, rvy = vb[0] - va[0], vb[1] - va[1]
        nx, ny = rec.normal
        vn = rvx * nx + rvy * ny
        total += math.hypot(rvx - vn * nx, rvy - vn * ny)
    return total / len(records)


def detect_interactions(sim: SimResult, thresholds: Thresholds) -> list[Interaction]:
    """Pairwise interactions: contact episodes backed by a state change.

    Multi-object contacts decompose into their two-object pairs because the
    contact log is already pairwise.
    """
    n_states = sim.n_states()
    for traj in sim.trajectories.values():
        if len(traj.positions) != n_states or len(traj.contacts) != n_states:
            raise ValueError("trajectory length does not match the configured duration")
    for rec in sim.contact_log:
        if not 0 <= rec.timestep < n_states - 1:
            raise ValueError("contact log does not match trajectory length")

    changes = detect_state_changes(sim, thresholds)
    by_object: dict[int, list[int]] = {}
    for ch in changes:
        by_object.setdefault(ch.object_id, []).append(ch.timestep)

    prox = thresholds.proximity_steps
    interactions: list[Interaction] = []
    for pair, start, end, records in _contact_episodes(sim.contact_log, thresholds.episode_gap):
        lo, hi = start - prox, end + prox
        backed = any(
            lo <= t <= hi
            for ident in pair if is_dynamic_id(ident)
            for t in by_object.get(ident, ())
        )
        if not backed:
            continue
        duration = end - start + 1
        if (duration >= thresholds.slide_min_steps
                and _mean_tangential_speed(pair, records, sim) > thresholds.slide_tangential_speed):
            kind = "slide"
        else:
            kind = "collision"
        interactions.append(Interaction(pair[0], pair[1], kind, start, end))
    interactions.sort(key=lambda i: (i.timestep_start, i.id_a, i.id_b))
    return interactions


# --------------------------------------------------------------------------
# Events


def _direction_changed(ident: int, inter: Interaction, sim: SimResult,
                       thresholds: Thresholds) -> bool:
    traj = sim.trajectories[ident]
    g, dt = sim.config.gravity, sim.config.dt
    last = len(traj.velocities) - 1
    kb = max(inter.timestep_start - 1, 0)
    ka = min(inter.timestep_end + 1, last)
    if ka <= kb:
        return False
    vb = traj.velocities[kb]
    va = traj.velocities[ka]
    px = py = 0.0
    for j in range(kb, ka):
        qx, qy = _ballistic_prediction(traj.contacts[j], g, dt)
        px += qx
        py += qy
    ax, ay = va[0] - px, va[1] - py
    if (math.hypot(*vb) >= thresholds.speed_floor
            and math.hypot(ax, ay) >= thresholds.speed_floor):
        return angle_between(vb[0], vb[1], ax, ay) > math.radians(thresholds.delta_heading_deg)
    return math.hypot(ax - vb[0], ay - vb[1]) > thresholds.delta_v


def segment_events(interactions: list[Interaction], sim: SimResult,
                   thresholds: Thresholds) -> list[Event]:
    """Per-object event spans between direction-changing interactions.

    Each event runs from one direction-changing interaction onset to the
    next one (or the video end); its partner and type come from the
    interaction that opened it.  Event ids are assigned afterwards in
    (ts, te, main id) order.
    """
    duration = sim.config.duration
    dt = sim.config.dt
    events: list[Event] = []
    for ident in sorted(sim.trajectories):
        mine = sorted((i for i in interactions if i.involves(ident)),
                      key=lambda i: (i.timestep_start, i.partner_of(ident)))
        boundaries = []
        seen_steps = set()
        for inter in mine:
            if inter.timestep_start in seen_steps:
                continue
            if _direction_changed(ident, inter, sim, thresholds):
                boundaries.append(inter)
                seen_steps.add(inter.timestep_start)
        for idx, inter in enumerate(boundaries):
            ts = inter.timestep_start * dt
            if idx + 1 < len(boundaries):
                te = boundaries[idx + 1].timestep_start * dt
            else:
                te = duration
            if te <= ts:
                continue
            events.append(Event(-1, ident, inter.partner_of(ident),
                                inter.interaction_type, ts, te))
    events.sort(key=lambda e: (e.ts, e.te, e.main_object_id))
    for idx, event in enumerate(events):
        event.event_id = idx + 1
    return events


# --------------------------------------------------------------------------
# Features


def _one_hot(size: int, index: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


def _object_feature(ident: int, k0: int, k1: int, sim: SimResult) -> np.ndarray:
    if is_dynamic_id(ident):
        spec = sim.scene.object_by_id(ident)
        traj = sim.trajectories[ident]
        pos = traj.positions[k0:k1 + 1].mean(axis=0)
        vel = traj.velocities[k0:k1 + 1].mean(axis=0)
        return np.concatenate([
            pos, vel,
            _one_hot(len(SHAPES), SHAPES.index(spec.shape)),
            _one_hot(len(SIZES), SIZES.index(spec.size)),
            _one_hot(N_COLORS, spec.color),
            _one_hot(len(PARTNER_CLASSES), 0),
        ])
    kind = sim.scene.element_by_id(ident).kind
    return np.concatenate([
        np.zeros(4),
        np.zeros(len(SHAPES) + len(SIZES) + N_COLORS),
        _one_hot(len(PARTNER_CLASSES), PARTNER_CLASSES.index(kind)),
    ])


def featurize_event(event: Event, sim: SimResult) -> np.ndarray:
    """Event vector: aggregated main and partner features plus the interval.

    Kinematics are temporal means over the event span; static partners get
    zero kinematics and their class one-hot.  Sets event.features.
    """
    dt = sim.config.dt
    k0 = int(round(event.ts / dt))
    k1 = int(round(event.te / dt))
    last = sim.n_states() - 1
    if not 0 <= k0 <= k1 <= last:
        raise ValueError(f"event interval [{event.ts}, {event.te}] outside trajectory range")
    vec = np.concatenate([
        _object_feature(event.main_object_id, k0, k1, sim),
        _object_feature(event.partner_id, k0, k1, sim),
        [event.ts, event.te],
    ])
    event.features = vec
    return vec


def event_mean_position(event: Event) -> np.ndarray:
    """Main-object mean position, read back from the feature layout."""
    if event.features is None:
        raise ValueError("event has no features")
    return np.asarray(event.features[_POS])


# --------------------------------------------------------------------------
# Event graph


def build_event_graph(events: list[Event], full_dag: bool = False) -> EventGraph:
    """Directed graph over events with per-object chains.

    Default edges follow each object's chain (consecutive chain events);
    full_dag adds an edge for every ordered pair instead.  Edge direction
    always agrees with the interval order.
    """
    ids = [e.event_id for e in events]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate event ids")
    by_id = {e.event_id: e for e in events}

    chains: dict[int, list[int]] = {}
    for event in events:
        members = [event.main_object_id]
        if event.has_dynamic_partner():
            members.append(event.partner_id)
        for ident in members:
            chains.setdefault(ident, []).append(event.event_id)
    for ident in chains:
        chains[ident].sort(key=lambda eid: by_id[eid].sort_key())

    edges: set[tuple[int, int]] = set()
    if full_dag:
        ordered = sorted(events, key=Event.sort_key)
        for i, u in enumerate(ordered):
            for v in ordered[i + 1:]:
                edges.add((u.event_id, v.event_id))
    else:
        for chain in chains.values():
            for u, v in zip(chain, chain[1:]):
                edges.add((u, v))

    adjacency: dict[int, list[int]] = {eid: [] for eid in ids}
    for u, v in sorted(edges):
        adjacency[u].append(v)
    return EventGraph(by_id, chains, adjacency)


def extract_video_events(sim: SimResult, thresholds: Thresholds | None = None,
                         full_dag: bool = False) -> tuple[list[Event], EventGraph]:
    """Full extraction: interactions, segmented events, features, graph."""
    thresholds = thresholds or Thresholds()
    interactions = detect_interactions(sim, thresholds)
    events = segment_events(interactions, sim, thresholds)
    for event in events:
        featurize_event(event, sim)
    return events, build_event_graph(events, full_dag=full_dag)
