"""Question-adaptive multi-head graph attention over relation graphs.

Every region feature is concatenated with the question vector before
attention, so the attention logits can shift with the question. M heads run
independently at width d_h/M; their outputs are concatenated to d_h,
projected back to d_v, and added to the original region features as a
residual, so the encoder preserves feature dimensionality.

Attention logits per head, for row i attending to j:

* implicit graph (all pairs):
    av_ij = (U v'_i) . (V v'_j) / sqrt(d_h / M)
    ab_ij = max(0, w . embed(geometry(b_i, b_j)))
    alpha_ij = ab_ij * exp(av_ij), normalized per row; a row whose ab
    entries are all zero falls back to uniform attention.
* explicit graphs (spatial / semantic), only for j in the neighborhood:
    logit_ij = (U v'_i) . (V_dir(i,j) v'_j) / sqrt(d_h / M) + c_lab(i,j)
    alpha = row softmax over the neighborhood
  and the aggregated message is alpha-weighted W_dir(i,j) v'_j + b_lab(i,j).

Ablation toggles: ``q_adaptive=False`` concatenates a zero question vector;
``attention=False`` replaces alpha with the uniform distribution over each
neighborhood (mean aggregation), leaving shapes unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ConfigError, Node, ParamStore
from .geometry import pair_geometry_embedding
from .graphs import DIR_NAMES, RegionSet, RelationGraph, directions_for_kind, n_graph_labels


@dataclass
class ImplicitHeadParams:
    u: Node  # (d_h/M, d_v + d_q)
    v: Node  # (d_h/M, d_v + d_q)
    w: Node  # (d_h/M, d_v + d_q)
    geom_w: Node  # (d_h,) scores the embedded pair geometry


@dataclass
class ExplicitHeadParams:
    u: Node  # (d_h/M, d_v + d_q)
    v_dir: dict[int, Node]
    w_dir: dict[int, Node]
    label_bias: Node  # (L, d_h/M), one bias vector per edge label
    label_logit: Node  # (L,), one scalar logit bias per edge label


def head_dim(d_h: int, n_heads: int) -> int:
    if d_h % n_heads != 0:
        raise ConfigError(f"d_h={d_h} is not divisible by the head count M={n_heads}")
    return d_h // n_heads


def init_implicit_params(store: ParamStore, rng, d_v: int, d_q: int, d_h: int, n_heads: int, prefix: str = "enc"):
    dh = head_dim(d_h, n_heads)
    d_in = d_v + d_q
    for m in range(n_heads):
        p = f"{prefix}.head{m}"
        store.add(f"{p}.U", ad.glorot(rng, (dh, d_in)))
        store.add(f"{p}.V", ad.glorot(rng, (dh, d_in)))
        store.add(f"{p}.W", ad.glorot(rng, (dh, d_in)))
        # nonnegative start keeps the zero-trimmed geometry gate alive at
        # init; a sign-mixed start can zero every pair and freeze the head
        a = math.sqrt(6.0 / (d_h + 1))
        store.add(f"{p}.w", rng.uniform(0.0, a, size=d_h))
    store.add(f"{prefix}.proj.W", ad.glorot(rng, (d_v, d_h)))
    store.add(f"{prefix}.proj.b", np.zeros(d_v))


def init_explicit_params(store: ParamStore, rng, kind: str, d_v: int, d_q: int, d_h: int, n_heads: int, prefix: str = "enc"):
    dh = head_dim(d_h, n_heads)
    d_in = d_v + d_q
    n_labels = n_graph_labels(kind)
    for m in range(n_heads):
        p = f"{prefix}.head{m}"
        store.add(f"{p}.U", ad.glorot(rng, (dh, d_in)))
        for d in directions_for_kind(kind):
            store.add(f"{p}.V_{DIR_NAMES[d]}", ad.glorot(rng, (dh, d_in)))
            store.add(f"{p}.W_{DIR_NAMES[d]}", ad.glorot(rng, (dh, d_in)))
        store.add(f"{p}.b_lab", np.zeros((n_labels, dh)))
        store.add(f"{p}.c_lab", np.zeros(n_labels))
    store.add(f"{prefix}.proj.W", ad.glorot(rng, (d_v, d_h)))
    store.add(f"{prefix}.proj.b", np.zeros(d_v))


def implicit_head(store: ParamStore, prefix: str, m: int) -> ImplicitHeadParams:
    p = f"{prefix}.head{m}"
    return ImplicitHeadParams(u=store[f"{p}.U"], v=store[f"{p}.V"], w=store[f"{p}.W"], geom_w=store[f"{p}.w"])


def explicit_head(store: ParamStore, prefix: str, m: int, kind: str) -> ExplicitHeadParams:
    p = f"{prefix}.head{m}"
    dirs = directions_for_kind(kind)
    return ExplicitHeadParams(
        u=store[f"{p}.U"],
        v_dir={d: store[f"{p}.V_{DIR_NAMES[d]}"] for d in dirs},
        w_dir={d: store[f"{p}.W_{DIR_NAMES[d]}"] for d in dirs},
        label_bias=store[f"{p}.b_lab"],
        label_logit=store[f"{p}.c_lab"],
    )


def concat_question(features: Node, q: Node) -> Node:
    """Rows [v_i || q]: every region feature gets the same question tail."""
    k = features.value.shape[0]
    d_q = q.value.shape[0]
    q_rows = ad.matmul(ad.constant(np.ones((k, 1))), ad.reshape(q, (1, d_q)))
    return ad.concat([features, q_rows], axis=1)


def implicit_attention_weights(vprime: Node, geom_embed: np.ndarray, head: ImplicitHeadParams) -> Node:
    """(K, K) attention with geometry-gated rows; zero geometry score zeroes the edge."""
    k = vprime.value.shape[0]
    dh = head.u.value.shape[0]
    pu = ad.matmul_t(vprime, head.u)
    pv = ad.matmul_t(vprime, head.v)
    av = ad.scale(ad.matmul_t(pu, pv), 1.0 / math.sqrt(dh))
    scores = ad.matmul(ad.constant(geom_embed), ad.reshape(head.geom_w, (head.geom_w.value.shape[0], 1)))
    ab = ad.reshape(ad.max0(scores), (k, k))
    return ad.geom_weighted_softmax(av, ab)


def explicit_attention_weights(vprime: Node, graph: RelationGraph, head: ExplicitHeadParams) -> Node:
    """(K, K) attention supported exactly on each vertex's neighborhood."""
    if graph.kind not in ("spatial", "semantic"):
        raise ConfigError(f"explicit attention needs a spatial or semantic graph, got {graph.kind!r}")
    dh = head.u.value.shape[0]
    dir_masks = graph.dir_masks()
    pu = ad.matmul_t(vprime, head.u)
    logits = None
    for d, v_d in head.v_dir.items():
        mask = dir_masks.get(d)
        if mask is None:
            continue
        s_d = ad.mul(ad.matmul_t(pu, ad.matmul_t(vprime, v_d)), ad.constant(mask))
        logits = s_d if logits is None else ad.add(logits, s_d)
    logits = ad.scale(logits, 1.0 / math.sqrt(dh))
    logits = ad.add(logits, ad.label_gather(head.label_logit, graph.label_matrix()))
    return ad.masked_softmax_rows(logits, graph.adjacency_mask())


def attention_aggregate(vprime: Node, alpha: Node, head, graph: RelationGraph) -> Node:
    """Per-head output: ReLU of the alpha-weighted projected neighbor sum."""
    if isinstance(head, ImplicitHeadParams):
        return ad.relu(ad.matmul(alpha, ad.matmul_t(vprime, head.w)))
    dir_masks = graph.dir_masks()
    n_labels = head.label_bias.value.shape[0]
    msg = None
    for d, w_d in head.w_dir.items():
        mask = dir_masks.get(d)
        if mask is None:
            continue
        part = ad.matmul(ad.mul(alpha, ad.constant(mask)), ad.matmul_t(vprime, w_d))
        msg = part if msg is None else ad.add(msg, part)
    bias = ad.matmul(ad.label_segment_sum(alpha, graph.label_matrix(), n_labels), head.label_bias)
    return ad.relu(ad.add(msg, bias))


def uniform_attention(graph: RelationGraph) -> Node:
    """Constant row-stochastic attention over each neighborhood (mean aggregation)."""
    mask = graph.adjacency_mask().astype(np.float64)
    return ad.constant(mask / mask.sum(axis=1, keepdims=True))


def encode_relations(
    regions: RegionSet,
    q: Node,
    graph: RelationGraph,
    store: ParamStore,
    n_heads: int,
    prefix: str = "enc",
    geom_embed: np.ndarray | None = None,
    geom_eps: float = 1e-3,
    attention: bool = True,
    q_adaptive: bool = True,
) -> Node:
    """Relation-aware features: multi-head attention, concat, project, residual."""
    features = ad.constant(regions.features)
    if not q_adaptive:
        q = ad.constant(np.zeros(q.value.shape[0]))
    vprime = concat_question(features, q)
    if graph.kind == "implicit" and geom_embed is None:
        d_h = store[f"{prefix}.head0.w"].value.shape[0]
        geom_embed = pair_geometry_embedding(regions.boxes, d_h, geom_eps)
    outputs = []
    for m in range(n_heads):
        if graph.kind == "implicit":
            head = implicit_head(store, prefix, m)
            alpha = implicit_attention_weights(vprime, geom_embed, head) if attention else uniform_attention(graph)
        else:
            head = explicit_head(store, prefix, m, graph.kind)
            alpha = explicit_attention_weights(vprime, graph, head) if attention else uniform_attention(graph)
        outputs.append(attention_aggregate(vprime, alpha, head, graph))
    stacked = outputs[0] if len(outputs) == 1 else ad.concat(outputs, axis=1)
    projected = ad.linear(stacked, store[f"{prefix}.proj.W"], store[f"{prefix}.proj.b"])
    return ad.add(projected, features)


def attention_maps(
    regions: RegionSet,
    q: Node,
    graph: RelationGraph,
    store: ParamStore,
    n_heads: int,
    prefix: str = "enc",
    geom_eps: float = 1e-3,
    q_adaptive: bool = True,
) -> list[np.ndarray]:
    """Per-head attention matrices as plain arrays, for offline inspection."""
    features = ad.constant(regions.features)
    if not q_adaptive:
        q = ad.constant(np.zeros(q.value.shape[0]))
    vprime = concat_question(features, q)
    maps = []
    geom_embed = None
    if graph.kind == "implicit":
        d_h = store[f"{prefix}.head0.w"].value.shape[0]
        geom_embed = pair_geometry_embedding(regions.boxes, d_h, geom_eps)
    for m in range(n_heads):
        if graph.kind == "implicit":
            alpha = implicit_attention_weights(vprime, geom_embed, implicit_head(store, prefix, m))
        else:
            alpha = explicit_attention_weights(vprime, graph, explicit_head(store, prefix, m, graph.kind))
        maps.append(alpha.value.copy())
    return maps
