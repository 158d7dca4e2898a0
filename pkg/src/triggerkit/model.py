"""Skip-connected message passing over premise graphs with exact gradients.

One training instance is a directed graph over the premise events of a
target.  Edge features combine a temporal sigmoid weight with a damped
bilinear semantic vector; L rounds of message passing refine the node
embeddings; a logistic classifier on [node embedding, target embedding]
scores each premise event as trigger or not.

Everything is float64 numpy and hand-differentiated.  Conventions that
matter for gradient checking: the rectifier subgradient at exactly zero
is 0, and the probability clamp in the loss passes zero gradient where it
is active.  Scatter sums run over edge arrays pre-sorted by (dst, src),
so results are bit-stable regardless of input edge order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .relations import RelationParams

PROB_EPS = 1e-7


@dataclass
class LayerParams:
    w1: np.ndarray  # (d, d)
    w2: np.ndarray  # (d, d)
    w3: np.ndarray  # (d, 2d)
    w4: np.ndarray  # (d, d)


@dataclass
class ModelParams:
    relation: RelationParams
    layers: list[LayerParams]
    target_w: np.ndarray      # (d, d)
    target_b: np.ndarray      # (d,)
    classifier_w: np.ndarray  # (2d,)
    classifier_b: float
    input_w: np.ndarray | None = None  # (d, d), used only with input projection
    input_b: np.ndarray | None = None


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int
    n_layers: int = 4
    use_input_proj: bool = False
    temporal_only: bool = False
    semantic_only: bool = False
    no_msg_skip: bool = False
    no_layer_skip: bool = False
    no_distance_penalty: bool = False
    window: float | None = None

    def __post_init__(self):
        if self.temporal_only and self.semantic_only:
            raise ValueError("temporal_only and semantic_only are mutually exclusive")
        if self.n_layers < 0:
            raise ValueError("n_layers must be non-negative")


@dataclass
class SegmentPlan:
    """Permutation plus reduceat boundaries for one scatter-sum direction."""

    order: np.ndarray | None
    offsets: np.ndarray
    rows: np.ndarray


def _make_plan(keys: np.ndarray, presorted: bool) -> SegmentPlan:
    order = None if presorted else np.argsort(keys, kind="stable")
    sorted_keys = keys if presorted else keys[order]
    rows, offsets = np.unique(sorted_keys, return_index=True)
    return SegmentPlan(order, offsets, rows)


def segment_sum(values: np.ndarray, plan: SegmentPlan, n_rows: int) -> np.ndarray:
    """Deterministic per-row sums of edge values (rows absent get zero)."""
    out = np.zeros((n_rows,) + values.shape[1:])
    if len(plan.rows) == 0:
        return out
    ordered = values if plan.order is None else values[plan.order]
    out[plan.rows] = np.add.reduceat(ordered, plan.offsets, axis=0)
    return out


@dataclass
class GraphInstance:
    """Precomputed tensors for one (video, target) training instance.

    Edge arrays must be sorted by (dst, src); builders enforce this so
    aggregation order (and therefore float rounding) is storage-invariant.
    """

    video_id: int
    target_event_id: int
    feats: np.ndarray          # (N, d) premise event features
    target_feat: np.ndarray    # (d,)
    labels: np.ndarray         # (N,) 1.0 for ground-truth triggers
    src: np.ndarray            # (E,) int edge sources
    dst: np.ndarray            # (E,) int edge destinations
    t4: np.ndarray             # (E, 4) temporal distances source -> dest
    edist: np.ndarray          # (E,) interval euclidean distances
    premise_event_ids: list[int] = field(default_factory=list)
    premise_types: list[str] = field(default_factory=list)
    _dst_plan: SegmentPlan | None = field(default=None, repr=False)
    _src_plan: SegmentPlan | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.feats.shape[0]

    def dst_plan(self) -> SegmentPlan:
        if self._dst_plan is None:
            self._dst_plan = _make_plan(self.dst, presorted=True)
        return self._dst_plan

    def src_plan(self) -> SegmentPlan:
        if self._src_plan is None:
            self._src_plan = _make_plan(self.src, presorted=False)
        return self._src_plan

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n_nodes).astype(np.float64)


def init_params(config: ModelConfig, seed: int,
                mean_edge_distance: float = 3.0) -> ModelParams:
    """Glorot-uniform matrices, zero biases, decay tuned to 1/e at the
    mean edge distance.

    The bilinear tensor and the temporal projection get variance-matched
    scales instead: a bilinear form sums d^2 products of unit-variance
    features, so slices need ~sqrt(3)/d to keep the tanh input at unit
    variance (Glorot leaves it saturated and unlearnable); temporal
    distances are raw seconds, so their weights start small with a
    positive bias that opens the gate (sigmoid(2) ~ 0.88), letting the
    model start near pass-through and learn to close edges.
    """
    rng = np.random.default_rng(seed)
    d = config.feature_dim

    def glorot(*shape, fan_in, fan_out):
        s = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=shape)

    relation = RelationParams(
        bilinear=rng.uniform(-math.sqrt(3.0) / d, math.sqrt(3.0) / d, size=(d, d, d)),
        bias=np.zeros(d),
        raw_decay=math.log(1.0 / max(mean_edge_distance, 1e-6)),
        temporal_weights=rng.uniform(-0.1, 0.1, size=4),
        temporal_bias=2.0,
    )
    layers = [
        LayerParams(
            w1=glorot(d, d, fan_in=d, fan_out=d),
            w2=glorot(d, d, fan_in=d, fan_out=d),
            w3=glorot(d, 2 * d, fan_in=2 * d, fan_out=d),
            w4=glorot(d, d, fan_in=d, fan_out=d),
        )
        for _ in range(config.n_layers)
    ]
    input_w = input_b = None
    if config.use_input_proj:
        input_w = glorot(d, d, fan_in=d, fan_out=d)
        input_b = np.zeros(d)
    return ModelParams(
        relation=relation,
        layers=layers,
        target_w=glorot(d, d, fan_in=d, fan_out=d),
        target_b=np.zeros(d),
        classifier_w=glorot(2 * d, fan_in=2 * d, fan_out=1),
        classifier_b=0.0,
        input_w=input_w,
        input_b=input_b,
    )


def zero_grads(params: ModelParams) -> ModelParams:
    return ModelParams(
        relation=RelationParams(
            bilinear=np.zeros_like(params.relation.bilinear),
            bias=np.zeros_like(params.relation.bias),
            raw_decay=0.0,
            temporal_weights=np.zeros_like(params.relation.temporal_weights),
            temporal_bias=0.0,
        ),
        layers=[LayerParams(np.zeros_like(l.w1), np.zeros_like(l.w2),
                            np.zeros_like(l.w3), np.zeros_like(l.w4))
                for l in params.layers],
        target_w=np.zeros_like(params.target_w),
        target_b=np.zeros_like(params.target_b),
        classifier_w=np.zeros_like(params.classifier_w),
        classifier_b=0.0,
        input_w=None if params.input_w is None else np.zeros_like(params.input_w),
        input_b=None if params.input_b is None else np.zeros_like(params.input_b),
    )


def flatten_params(params: ModelParams) -> np.ndarray:
    parts = [
        params.relation.bilinear.ravel(),
        params.relation.bias.ravel(),
        [params.relation.raw_decay],
        params.relation.temporal_weights.ravel(),
        [params.relation.temporal_bias],
        params.target_w.ravel(),
        params.target_b.ravel(),
        params.classifier_w.ravel(),
        [params.classifier_b],
    ]
    for layer in params.layers:
        parts.extend([layer.w1.ravel(), layer.w2.ravel(), layer.w3.ravel(), layer.w4.ravel()])
    if params.input_w is not None:
        parts.extend([params.input_w.ravel(), params.input_b.ravel()])
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])


def unflatten_params(vector: np.ndarray, template: ModelParams) -> ModelParams:
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape)) if shape else 1
        chunk = vector[pos:pos + size]
        pos += size
        return chunk.reshape(shape) if shape else float(chunk[0])

    rel = template.relation
    relation = RelationParams(
        bilinear=take(rel.bilinear.shape),
        bias=take(rel.bias.shape),
        raw_decay=take(()),
        temporal_weights=take(rel.temporal_weights.shape),
        temporal_bias=take(()),
    )
    target_w = take(template.target_w.shape)
    target_b = take(template.target_b.shape)
    classifier_w = take(template.classifier_w.shape)
    classifier_b = take(())
    layers = [LayerParams(take(l.w1.shape), take(l.w2.shape),
                          take(l.w3.shape), take(l.w4.shape))
              for l in template.layers]
    input_w = input_b = None
    if template.input_w is not None:
        input_w = take(template.input_w.shape)
        input_b = take(template.input_b.shape)
    if pos != vector.size:
        raise ValueError("parameter vector size mismatch")
    return ModelParams(relation, layers, target_w, target_b,
                       classifier_w, classifier_b, input_w, input_b)


# --------------------------------------------------------------------------
# Forward pass


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class EdgeCache:
    tanh_u: np.ndarray | None   # (E, k)
    gamma: np.ndarray | None    # (E,)
    r_temp: np.ndarray | None   # (E,)
    r_sem: np.ndarray | None    # (E, k)
    r: np.ndarray               # (E, k)


def edge_features_array(inst: GraphInstance, params: ModelParams,
                        config: ModelConfig) -> EdgeCache:
    """Combined edge features for all edges of one instance.

    The bilinear values are computed on the all-pairs grid (two small
    matrix products) and gathered per edge, which is far cheaper than
    per-edge tensor contractions.
    """
    d = config.feature_dim
    n_edges = len(inst.src)
    if config.temporal_only:
        logits = inst.t4 @ params.relation.temporal_weights + params.relation.temporal_bias
        r_temp = _sigmoid(logits)
        r = np.repeat(r_temp[:, None], d, axis=1)
        return EdgeCache(None, None, r_temp, None, r)

    if n_edges:
        t = np.tensordot(inst.feats, params.relation.bilinear, axes=([1], [0]))
        grid = np.tensordot(t, inst.feats, axes=([1], [1]))  # (N, k, N)
        u = grid[inst.src, :, inst.dst]
    else:
        u = np.zeros((0, d))
    tanh_u = np.tanh(u + params.relation.bias)
    if config.no_distance_penalty:
        gamma = np.ones(n_edges)
    else:
        gamma = np.exp(-params.relation.decay_rate * inst.edist)
    r_sem = gamma[:, None] * tanh_u
    if config.semantic_only:
        r_temp = None
        r = r_sem
    else:
        logits = inst.t4 @ params.relation.temporal_weights + params.relation.temporal_bias
        r_temp = _sigmoid(logits)
        r = r_temp[:, None] * r_sem
    return EdgeCache(tanh_u, gamma, r_temp, r_sem, r)


@dataclass
class LayerCache:
    h_prev: np.ndarray
    h_src: np.ndarray
    cat: np.ndarray
    m_pre: np.ndarray
    agg_msg: np.ndarray
    agg_skip: np.ndarray
    f_layer: np.ndarray
    s: np.ndarray


def forward_layer(h_prev: np.ndarray, r: np.ndarray, src: np.ndarray,
                  dst: np.ndarray, inv_deg: np.ndarray, layer: LayerParams,
                  no_msg_skip: bool = False, no_layer_skip: bool = False,
                  dst_plan: SegmentPlan | None = None
                  ) -> tuple[np.ndarray, LayerCache]:
    """One message-passing layer.

    Messages are rectified projections of [source embedding, edge feature];
    the aggregation averages messages and, unless ablated, the raw
    (embedding + edge feature) skip term.  The layer update adds the
    previous embedding (unless ablated) and rectifies.  Nodes without
    in-edges keep their previous embedding through the rectifier.
    """
    n = h_prev.shape[0]
    if dst_plan is None:
        dst_plan = _make_plan(np.asarray(dst), presorted=False)
    h_src = h_prev[src]
    cat = np.concatenate([h_src, r], axis=1)
    m_pre = cat @ layer.w3.T
    msg = _relu(m_pre)
    agg_msg = segment_sum(msg, dst_plan, n)
    if not no_msg_skip:
        agg_skip = segment_sum(h_src + r, dst_plan, n)
    else:
        agg_skip = np.zeros_like(h_prev)
    f_layer = agg_msg @ layer.w1.T
    if not no_msg_skip:
        f_layer = f_layer + agg_skip @ layer.w2.T
    f_layer = f_layer * inv_deg[:, None]
    s = f_layer @ layer.w4.T
    if not no_layer_skip:
        s = s + h_prev
    h = _relu(s)
    return h, LayerCache(h_prev, h_src, cat, m_pre, agg_msg, agg_skip, f_layer, s)


@dataclass
class ForwardCache:
    embeddings: list[np.ndarray]     # h^0 .. h^L, each (N, d)
    target_embedding: np.ndarray     # (d,)
    probabilities: np.ndarray        # (N,)
    edge_cache: EdgeCache
    layer_caches: list[LayerCache]
    inv_deg: np.ndarray


def forward(inst: GraphInstance, params: ModelParams,
            config: ModelConfig) -> ForwardCache:
    if inst.feats.shape[1] != config.feature_dim:
        raise ValueError("instance feature dimension does not match the model")
    edges = edge_features_array(inst, params, config)
    deg = inst.in_degrees()
    inv_deg = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)

    if config.use_input_proj:
        h = inst.feats @ params.input_w.T + params.input_b
    else:
        h = inst.feats
    embeddings = [h]
    layer_caches: list[LayerCache] = []
    for level in range(config.n_layers):
        h, cache = forward_layer(h, edges.r, inst.src, inst.dst, inv_deg,
                                 params.layers[level],
                                 config.no_msg_skip, config.no_layer_skip,
                                 dst_plan=inst.dst_plan())
        embeddings.append(h)
        layer_caches.append(cache)

    z = params.target_w @ inst.target_feat + params.target_b
    d = config.feature_dim
    logits = embeddings[-1] @ params.classifier_w[:d] \
        + float(z @ params.classifier_w[d:]) + params.classifier_b
    probs = _sigmoid(logits)
    return ForwardCache(embeddings, z, probs, edges, layer_caches, inv_deg)


def classify(h_i: np.ndarray, z_t: np.ndarray, params: ModelParams) -> float:
    """Trigger probability for one candidate embedding and target embedding."""
    d = h_i.shape[0]
    logit = float(h_i @ params.classifier_w[:d] + z_t @ params.classifier_w[d:]
                  + params.classifier_b)
    return float(_sigmoid(np.array([logit]))[0])


def bce_loss(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross entropy with probabilities clamped to
    [PROB_EPS, 1 - PROB_EPS]."""
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have the same length")
    p = np.clip(predictions, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


# --------------------------------------------------------------------------
# Backward pass


def _accumulate_instance_grads(inst: GraphInstance, params: ModelParams,
                               config: ModelConfig, grads: ModelParams,
                               cache: ForwardCache, pos_weight: float) -> tuple[float, float]:
    """Add d(sum of weighted per-node BCE terms)/d(params) into grads.

    Returns (weighted loss sum, weight total) so callers can form the
    batch mean.  The gradient of the clamp region is exactly zero, which
    matches finite differences of the clamped loss away from the clamp
    boundary.
    """
    d = config.feature_dim
    p = cache.probabilities
    y = inst.labels
    weights = np.where(y == 1.0, pos_weight, 1.0)
    p_clamped = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    terms = -(y * np.log(p_clamped) + (1.0 - y) * np.log(1.0 - p_clamped))
    loss_sum = float((weights * terms).sum())

    inside = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    dlogit = np.where(inside, weights * (p - y), 0.0)

    h_last = cache.embeddings[-1]
    z = cache.target_embedding
    grads.classifier_w[:d] += h_last.T @ dlogit
    grads.classifier_w[d:] += z * dlogit.sum()
    grads.classifier_b += dlogit.sum()
    dh = np.outer(dlogit, params.classifier_w[:d])
    dz = params.classifier_w[d:] * dlogit.sum()
    grads.target_w += np.outer(dz, inst.target_feat)
    grads.target_b += dz

    dr_total = np.zeros((len(inst.src), d))
    for level in range(config.n_layers - 1, -1, -1):
        layer = params.layers[level]
        lg = grads.layers[level]
        lc = cache.layer_caches[level]
        ds = dh * (lc.s > 0.0)
        dh = ds if not config.no_layer_skip else np.zeros_like(ds)
        lg.w4 += ds.T @ lc.f_layer
        df = (ds @ layer.w4) * cache.inv_deg[:, None]
        lg.w1 += df.T @ lc.agg_msg
        da = df @ layer.w1
        dmsg = da[inst.dst]
        if not config.no_msg_skip:
            lg.w2 += df.T @ lc.agg_skip
            dskip = (df @ layer.w2)[inst.dst]
        else:
            dskip = np.zeros_like(dmsg)
        dm_pre = dmsg * (lc.m_pre > 0.0)
        lg.w3 += dm_pre.T @ lc.cat
        dcat = dm_pre @ layer.w3
        dh_src = dcat[:, :d] + dskip
        dr_total += dcat[:, d:] + dskip
        dh = dh + segment_sum(dh_src, inst.src_plan(), inst.n_nodes)

    _edge_backward(inst, params, config, grads, cache.edge_cache, dr_total)

    if config.use_input_proj:
        grads.input_w += dh.T @ inst.feats
        grads.input_b += dh.sum(axis=0)
    return loss_sum, float(weights.sum())


def _edge_backward(inst: GraphInstance, params: ModelParams, config: ModelConfig,
                   grads: ModelParams, edges: EdgeCache, dr: np.ndarray) -> None:
    if len(inst.src) == 0:
        return
    rel = params.relation
    rel_grads = grads.relation
    if config.temporal_only:
        dr_temp = dr.sum(axis=1)
        _temporal_backward(inst, edges.r_temp, dr_temp, rel, rel_grads)
        return

    if config.semantic_only:
        dr_sem = dr
    else:
        dr_sem = dr * edges.r_temp[:, None]
        dr_temp = (dr * edges.r_sem).sum(axis=1)
        _temporal_backward(inst, edges.r_temp, dr_temp, rel, rel_grads)

    dtanh = dr_sem * edges.gamma[:, None]
    du = dtanh * (1.0 - edges.tanh_u ** 2)
    rel_grads.bias += du.sum(axis=0)
    # dW[p, q, s] = sum_e feats[src_e, p] * feats[dst_e, q] * du[e, s],
    # routed through the all-pairs grid so both contractions are GEMMs.
    n, k = inst.n_nodes, du.shape[1]
    du_grid = np.zeros((n, n, k))
    du_grid[inst.src, inst.dst] = du
    dt = np.tensordot(du_grid, inst.feats, axes=([1], [0]))  # (N, k, d)
    rel_grads.bilinear += np.tensordot(inst.feats, dt, axes=([0], [0])).transpose(0, 2, 1)
    if not config.no_distance_penalty:
        dgamma = (dr_sem * edges.tanh_u).sum(axis=1)
        dbeta = float((dgamma * -inst.edist * edges.gamma).sum())
        rel_grads.raw_decay += dbeta * rel.decay_rate


def _temporal_backward(inst, r_temp, dr_temp, rel, rel_grads) -> None:
    dpre = dr_temp * r_temp * (1.0 - r_temp)
    rel_grads.temporal_weights += inst.t4.T @ dpre
    rel_grads.temporal_bias += float(dpre.sum())


def gradients(batch: list[GraphInstance], params: ModelParams,
              config: ModelConfig, pos_weight: float = 1.0) -> tuple[float, ModelParams]:
    """Mean clamped BCE over all premise nodes in the batch, with exact
    gradients for every parameter.  Parameters unused under the active
    configuration keep exactly zero gradient.  pos_weight > 1 upweights
    trigger nodes (the mean renormalizes over total weight)."""
    grads = zero_grads(params)
    total_loss = 0.0
    total_weight = 0.0
    for inst in batch:
        cache = forward(inst, params, config)
        loss_sum, weight_sum = _accumulate_instance_grads(
            inst, params, config, grads, cache, pos_weight)
        total_loss += loss_sum
        total_weight += weight_sum
    if total_weight == 0.0:
        raise ValueError("batch contains no premise nodes")
    scale = 1.0 / total_weight
    _scale_params(grads, scale)
    return total_loss * scale, grads


def _scale_params(grads: ModelParams, scale: float) -> None:
    grads.relation.bilinear *= scale
    grads.relation.bias *= scale
    grads.relation.raw_decay *= scale
    grads.relation.temporal_weights *= scale
    grads.relation.temporal_bias *= scale
    for layer in grads.layers:
        layer.w1 *= scale
        layer.w2 *= scale
        layer.w3 *= scale
        layer.w4 *= scale
    grads.target_w *= scale
    grads.target_b *= scale
    grads.classifier_w *= scale
    grads.classifier_b *= scale
    if grads.input_w is not None:
        grads.input_w *= scale
        grads.input_b *= scale
