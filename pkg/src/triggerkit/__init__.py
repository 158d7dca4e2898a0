"""Counterfactual event-sequence benchmarks and relational trigger finding.

Two halves: a seeded 2D physics pipeline that synthesizes videos, extracts
interaction events and labels trigger-target pairs by counterfactual
re-simulation; and a skip-connected message-passing model (plus baselines
and ablations) that learns to point at the trigger of a target event.
"""

from .allen import AllenOrder, TemporalDistance, allen_order, precedes, temporal_distance
from .events import (Event, EventGraph, Interaction, StateChange, Thresholds,
                     build_event_graph, detect_interactions, extract_video_events,
                     featurize_event, segment_events)
from .labeling import (DatasetBundle, Tolerances, TriggerTargetPair, build_dataset,
                       build_labeling_context, dfs_all_paths, extract_trigger_pairs,
                       find_affecting_objects, label_video, match_target)
from .model import (GraphInstance, ModelConfig, ModelParams, bce_loss, classify,
                    forward, forward_layer, gradients, init_params)
from .physics import SimResult, SimulationDivergedError, SimulationError, simulate
from .relations import (EdgeFeature, RelationParams, build_premise_graph,
                        combine_relation, semantic_relation)
from .scene import (DynamicObjectSpec, SceneSpec, StaticElement, UnplaceableSceneError,
                    WorldConfig, build_scene, remove_object)
from .training import TrainConfig, TrainedModel, TrainResult, train
from .evaluation import EvalReport, evaluate, run_ablation, run_baseline

__version__ = "0.1.0"
