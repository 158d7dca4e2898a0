"""File formats: JSON-Lines datasets, checkpoints, reports.

Every file starts with (or is) an object carrying format_version; loaders
reject versions they do not know.  Writing goes through one canonical
JSON encoder (sorted keys, tight separators, repr-exact floats), so
serialize -> parse -> serialize is byte-identical and regeneration from
the same config reproduces files exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict

import numpy as np

from .events import Event, Thresholds
from .geometry import Polygon, Vec2
from .labeling import (DatasetBundle, Tolerances, TriggerTargetPair, VideoData,
                       split_video_ids)
from .model import LayerParams, ModelConfig, ModelParams
from .physics import ContactRecord, SimResult, Trajectory
from .relations import RelationParams
from .scene import DynamicObjectSpec, SceneSpec, StaticElement, WorldConfig
from .training import FeatureScaler, TrainedModel

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def check_version(record: dict, path: str = "<memory>") -> None:
    if record.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version "
                          f"{record.get('format_version')!r}")


# --------------------------------------------------------------------------
# Scene / world


def scene_to_dict(scene: SceneSpec) -> dict:
    return {
        "layout_id": scene.layout_id,
        "seed": scene.seed,
        "world_size": scene.world_size,
        "objects": [
            {
                "id": o.object_id, "shape": o.shape, "size": o.size, "color": o.color,
                "position": [o.init_position.x, o.init_position.y],
                "velocity": [o.init_velocity.x, o.init_velocity.y],
            }
            for o in scene.dynamic_objects
        ],
        "elements": [
            {
                "id": e.element_id, "kind": e.kind,
                "parts": [{"vertices": [list(v) for v in poly.vertices],
                           "center": [cx, cy]} for poly, cx, cy in e.parts],
            }
            for e in scene.static_elements
        ],
    }


def scene_from_dict(data: dict) -> SceneSpec:
    objects = tuple(
        DynamicObjectSpec(o["id"], o["shape"], o["size"], o["color"],
                          Vec2(*o["position"]), Vec2(*o["velocity"]))
        for o in data["objects"]
    )
    elements = tuple(
        StaticElement(e["id"], e["kind"], tuple(
            (Polygon(tuple(tuple(v) for v in part["vertices"])),
             part["center"][0], part["center"][1])
            for part in e["parts"]
        ))
        for e in data["elements"]
    )
    return SceneSpec(data["layout_id"], data["seed"], objects, elements, data["world_size"])


def world_to_dict(world: WorldConfig) -> dict:
    return asdict(world)


def world_from_dict(data: dict) -> WorldConfig:
    return WorldConfig(**data)


# --------------------------------------------------------------------------
# Video records (trajectories + contact log)


def write_video_jsonl(path: str, video_id: int, sim: SimResult) -> None:
    """One JSON-Lines record per video: header, then one line per state."""
    by_step: dict[int, list[ContactRecord]] = {}
    for rec in sim.contact_log:
        by_step.setdefault(rec.timestep, []).append(rec)
    with open(path, "w") as fh:
        header = {
            "format_version": FORMAT_VERSION,
            "kind": "video",
            "video_id": video_id,
            "scene": scene_to_dict(sim.scene),
            "world": world_to_dict(sim.config),
        }
        fh.write(dumps(header) + "\n")
        ids = sorted(sim.trajectories)
        for k in range(sim.n_states()):
            line = {
                "t": k,
                "objects": {
                    str(i): {
                        "p": list(sim.trajectories[i].positions[k]),
                        "v": list(sim.trajectories[i].velocities[k]),
                        "c": sorted(sim.trajectories[i].contacts[k]),
                    }
                    for i in ids
                },
                "log": [
                    [r.id_a, r.id_b, [r.normal[0], r.normal[1]], r.impulse]
                    for r in by_step.get(k, [])
                ],
            }
            fh.write(dumps(line) + "\n")


def read_video_jsonl(path: str) -> tuple[int, SimResult]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        check_version(header, path)
        if header.get("kind") != "video":
            raise FormatError(f"{path}: not a video record")
        scene = scene_from_dict(header["scene"])
        world = world_from_dict(header["world"])
        states = [json.loads(line) for line in fh if line.strip()]
    n = len(states)
    trajectories = {}
    for obj in scene.dynamic_objects:
        key = str(obj.object_id)
        positions = np.array([s["objects"][key]["p"] for s in states])
        velocities = np.array([s["objects"][key]["v"] for s in states])
        contacts = [frozenset(s["objects"][key]["c"]) for s in states]
        trajectories[obj.object_id] = Trajectory(obj.object_id, positions,
                                                 velocities, contacts)
    log = [
        ContactRecord(s["t"], a, b, (nx, ny), imp)
        for s in states for a, b, (nx, ny), imp in s["log"]
    ]
    if n != world.n_steps + 1:
        raise FormatError(f"{path}: {n} states for {world.n_steps} steps")
    return header["video_id"], SimResult(scene, world, trajectories, log)


# --------------------------------------------------------------------------
# Events and pairs


def write_events_jsonl(path: str, videos: dict[int, VideoData],
                       feature_dim: int) -> None:
    with open(path, "w") as fh:
        fh.write(dumps({"format_version": FORMAT_VERSION, "kind": "events",
                        "feature_dim": feature_dim}) + "\n")
        for video_id in sorted(videos):
            for e in videos[video_id].events:
                fh.write(dumps({
                    "video_id": video_id,
                    "event_id": e.event_id,
                    "main": e.main_object_id,
                    "partner": e.partner_id,
                    "type": e.interaction_type,
                    "ts": e.ts,
                    "te": e.te,
                    "features": list(map(float, e.features)),
                }) + "\n")


def read_events_jsonl(path: str) -> tuple[int, dict[int, list[Event]]]:
    """Returns (feature_dim, events per video); graph edges are recomputed
    by consumers, never stored."""
    per_video: dict[int, list[Event]] = {}
    with open(path) as fh:
        header = json.loads(fh.readline())
        check_version(header, path)
        if header.get("kind") != "events":
            raise FormatError(f"{path}: not an events file")
        dim = header["feature_dim"]
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            if len(rec["features"]) != dim:
                raise FormatError(f"{path}:{lineno}: feature length "
                                  f"{len(rec['features'])} != header dim {dim}")
            event = Event(rec["event_id"], rec["main"], rec["partner"],
                          rec["type"], rec["ts"], rec["te"],
                          np.asarray(rec["features"], dtype=np.float64))
            per_video.setdefault(rec["video_id"], []).append(event)
    return dim, per_video


def write_pairs_jsonl(path: str, videos: dict[int, VideoData]) -> None:
    with open(path, "w") as fh:
        fh.write(dumps({"format_version": FORMAT_VERSION, "kind": "pairs"}) + "\n")
        for video_id in sorted(videos):
            for p in videos[video_id].pairs:
                fh.write(dumps({
                    "video_id": p.video_id,
                    "target_event_id": p.target_event_id,
                    "trigger_event_ids": sorted(p.trigger_event_ids),
                    "affecting_object_ids": sorted(p.affecting_object_ids),
                    "path_truncated": p.path_truncated,
                }) + "\n")


def read_pairs_jsonl(path: str) -> dict[int, list[TriggerTargetPair]]:
    per_video: dict[int, list[TriggerTargetPair]] = {}
    with open(path) as fh:
        header = json.loads(fh.readline())
        check_version(header, path)
        if header.get("kind") != "pairs":
            raise FormatError(f"{path}: not a pairs file")
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            pair = TriggerTargetPair(
                rec["video_id"], rec["target_event_id"],
                frozenset(rec["trigger_event_ids"]),
                frozenset(rec["affecting_object_ids"]),
                rec.get("path_truncated", False),
            )
            per_video.setdefault(rec["video_id"], []).append(pair)
    return per_video


# --------------------------------------------------------------------------
# Dataset directory


def thresholds_to_dict(t: Thresholds) -> dict:
    return asdict(t)


def tolerances_to_dict(t: Tolerances) -> dict:
    return asdict(t)


def save_dataset(dataset: DatasetBundle, out_dir: str,
                 store_trajectories: bool = True) -> None:
    """Write manifest, scenes, events, pairs and (optionally) trajectories."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "manifest",
        "seed": dataset.seed,
        "n_requested": dataset.n_requested,
        "n_usable": len(dataset.videos),
        "feature_dim": dataset.feature_dim,
        "splits": {k: sorted(v) for k, v in dataset.splits.items()},
        "pair_counts": dataset.pair_counts(),
        "world": world_to_dict(dataset.world),
        "thresholds": thresholds_to_dict(dataset.thresholds),
        "tolerances": tolerances_to_dict(dataset.tolerances),
        "store_trajectories": store_trajectories,
    }
    from .evaluation import fingerprint

    manifest["config_fingerprint"] = fingerprint(
        {k: manifest[k] for k in ("seed", "n_requested", "world", "thresholds",
                                  "tolerances")})
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(dumps(manifest) + "\n")

    with open(os.path.join(out_dir, "scenes.jsonl"), "w") as fh:
        fh.write(dumps({"format_version": FORMAT_VERSION, "kind": "scenes"}) + "\n")
        for video_id in sorted(dataset.videos):
            fh.write(dumps({"video_id": video_id,
                            "scene": scene_to_dict(dataset.videos[video_id].scene)}) + "\n")

    write_events_jsonl(os.path.join(out_dir, "events.jsonl"),
                       dataset.videos, dataset.feature_dim)
    write_pairs_jsonl(os.path.join(out_dir, "pairs.jsonl"), dataset.videos)

    if store_trajectories:
        video_dir = os.path.join(out_dir, "videos")
        os.makedirs(video_dir, exist_ok=True)
        for video_id in sorted(dataset.videos):
            data = dataset.videos[video_id]
            if data.sim is None:
                continue
            write_video_jsonl(os.path.join(video_dir, f"video_{video_id:05d}.jsonl"),
                              video_id, data.sim)


def load_dataset(path: str) -> DatasetBundle:
    with open(os.path.join(path, "manifest.json")) as fh:
        manifest = json.loads(fh.read())
    check_version(manifest, path)
    if manifest.get("kind") != "manifest":
        raise FormatError(f"{path}: not a dataset manifest")
    world = world_from_dict(manifest["world"])
    thresholds = Thresholds(**manifest["thresholds"])
    tolerances = Tolerances(**manifest["tolerances"])

    scenes: dict[int, SceneSpec] = {}
    with open(os.path.join(path, "scenes.jsonl")) as fh:
        header = json.loads(fh.readline())
        check_version(header, path)
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                scenes[rec["video_id"]] = scene_from_dict(rec["scene"])

    dim, events = read_events_jsonl(os.path.join(path, "events.jsonl"))
    pairs = read_pairs_jsonl(os.path.join(path, "pairs.jsonl"))

    videos = {
        vid: VideoData(vid, scenes[vid], world, events.get(vid, []),
                       pairs.get(vid, []))
        for vid in scenes
    }
    return DatasetBundle(
        seed=manifest["seed"], feature_dim=dim, world=world,
        thresholds=thresholds, tolerances=tolerances, videos=videos,
        splits={k: list(v) for k, v in manifest["splits"].items()},
        n_requested=manifest["n_requested"],
    )


# --------------------------------------------------------------------------
# Checkpoints


def _array_to_dict(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}


def _array_from_dict(data: dict, expect_shape=None) -> np.ndarray:
    try:
        arr = np.asarray(data["data"], dtype=np.float64).reshape(data["shape"])
    except (ValueError, TypeError) as err:
        raise FormatError(f"malformed checkpoint array: {err}") from err
    if expect_shape is not None and tuple(arr.shape) != tuple(expect_shape):
        raise FormatError(f"checkpoint array shape {arr.shape} != expected {expect_shape}")
    return arr


def save_checkpoint(model: TrainedModel, path: str) -> None:
    p = model.params
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "checkpoint",
        "name": model.name,
        "config": asdict(model.config),
        "scaler": {"mean": _array_to_dict(model.scaler.mean),
                   "std": _array_to_dict(model.scaler.std)},
        "params": {
            "relation": {
                "bilinear": _array_to_dict(p.relation.bilinear),
                "bias": _array_to_dict(p.relation.bias),
                "raw_decay": p.relation.raw_decay,
                "temporal_weights": _array_to_dict(p.relation.temporal_weights),
                "temporal_bias": p.relation.temporal_bias,
            },
            "layers": [
                {"w1": _array_to_dict(l.w1), "w2": _array_to_dict(l.w2),
                 "w3": _array_to_dict(l.w3), "w4": _array_to_dict(l.w4)}
                for l in p.layers
            ],
            "target_w": _array_to_dict(p.target_w),
            "target_b": _array_to_dict(p.target_b),
            "classifier_w": _array_to_dict(p.classifier_w),
            "classifier_b": p.classifier_b,
            "input_w": None if p.input_w is None else _array_to_dict(p.input_w),
            "input_b": None if p.input_b is None else _array_to_dict(p.input_b),
        },
    }
    with open(path, "w") as fh:
        fh.write(dumps(payload) + "\n")


def load_checkpoint(path: str) -> TrainedModel:
    with open(path) as fh:
        payload = json.loads(fh.read())
    check_version(payload, path)
    if payload.get("kind") != "checkpoint":
        raise FormatError(f"{path}: not a checkpoint")
    config = ModelConfig(**payload["config"])
    d = config.feature_dim
    raw = payload["params"]
    relation = RelationParams(
        bilinear=_array_from_dict(raw["relation"]["bilinear"], (d, d, d)),
        bias=_array_from_dict(raw["relation"]["bias"], (d,)),
        raw_decay=raw["relation"]["raw_decay"],
        temporal_weights=_array_from_dict(raw["relation"]["temporal_weights"], (4,)),
        temporal_bias=raw["relation"]["temporal_bias"],
    )
    layers = [
        LayerParams(
            w1=_array_from_dict(l["w1"], (d, d)),
            w2=_array_from_dict(l["w2"], (d, d)),
            w3=_array_from_dict(l["w3"], (d, 2 * d)),
            w4=_array_from_dict(l["w4"], (d, d)),
        )
        for l in raw["layers"]
    ]
    if len(layers) < config.n_layers:
        raise FormatError(f"{path}: {len(layers)} layers for n_layers={config.n_layers}")
    params = ModelParams(
        relation=relation,
        layers=layers,
        target_w=_array_from_dict(raw["target_w"], (d, d)),
        target_b=_array_from_dict(raw["target_b"], (d,)),
        classifier_w=_array_from_dict(raw["classifier_w"], (2 * d,)),
        classifier_b=raw["classifier_b"],
        input_w=None if raw["input_w"] is None else _array_from_dict(raw["input_w"], (d, d)),
        input_b=None if raw["input_b"] is None else _array_from_dict(raw["input_b"], (d,)),
    )
    scaler = FeatureScaler(_array_from_dict(payload["scaler"]["mean"], (d,)),
                           _array_from_dict(payload["scaler"]["std"], (d,)))
    return TrainedModel(params, config, scaler, payload.get("name", "relnet"))


# --------------------------------------------------------------------------
# External event ingestion


def export_external(dataset: DatasetBundle, out_dir: str) -> None:
    """Write the dataset in the generic external-feature format."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "external_events.jsonl"), "w") as fh:
        fh.write(dumps({"format_version": FORMAT_VERSION, "kind": "external_events",
                        "feature_dim": dataset.feature_dim}) + "\n")
        for video_id in sorted(dataset.videos):
            for e in dataset.videos[video_id].events:
                fh.write(dumps({
                    "video_id": video_id, "event_id": e.event_id,
                    "features": list(map(float, e.features)),
                    "ts": e.ts, "te": e.te,
                    "label_text": e.interaction_type,
                }) + "\n")
    write_pairs_jsonl(os.path.join(out_dir, "pairs.jsonl"), dataset.videos)
    with open(os.path.join(out_dir, "external_manifest.json"), "w") as fh:
        fh.write(dumps({
            "format_version": FORMAT_VERSION, "kind": "external_manifest",
            "feature_dim": dataset.feature_dim,
            "splits": {k: sorted(v) for k, v in dataset.splits.items()},
        }) + "\n")


def ingest_external_events(path: str, split_seed: int = 0) -> DatasetBundle:
    """Load externally produced event features plus a pairs file.

    Expects external_events.jsonl and pairs.jsonl under `path`; an
    external_manifest.json supplies splits, otherwise videos are split
    60:20:20 deterministically from split_seed.
    """
    events_path = os.path.join(path, "external_events.jsonl")
    pairs_path = os.path.join(path, "pairs.jsonl")
    if not os.path.exists(pairs_path):
        raise FormatError(f"{path}: missing pairs.jsonl")
    per_video: dict[int, list[Event]] = {}
    with open(events_path) as fh:
        header = json.loads(fh.readline())
        check_version(header, events_path)
        if header.get("kind") != "external_events":
            raise FormatError(f"{events_path}: not an external events file")
        dim = header["feature_dim"]
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            if len(rec["features"]) != dim:
                raise FormatError(f"{events_path}:{lineno}: feature length "
                                  f"{len(rec['features'])} != header dim {dim}")
            event = Event(rec["event_id"], 0, 0,
                          rec.get("label_text") or "external",
                          rec["ts"], rec["te"],
                          np.asarray(rec["features"], dtype=np.float64))
            per_video.setdefault(rec["video_id"], []).append(event)
    pairs = read_pairs_jsonl(pairs_path)

    manifest_path = os.path.join(path, "external_manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path) as fh:
            manifest = json.loads(fh.read())
        check_version(manifest, manifest_path)
        splits = {k: list(v) for k, v in manifest["splits"].items()}
    else:
        splits = split_video_ids(sorted(per_video), split_seed)

    videos = {
        vid: VideoData(vid, None, None, evts, pairs.get(vid, []))
        for vid, evts in sorted(per_video.items())
    }
    return DatasetBundle(
        seed=split_seed, feature_dim=dim, world=WorldConfig(),
        thresholds=Thresholds(), tolerances=Tolerances(),
        videos=videos, splits=splits, n_requested=len(videos),
    )
