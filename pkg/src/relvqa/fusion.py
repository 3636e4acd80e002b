"""Multimodal fusion, answer head, loss, metric, and the inference ensemble.

Fusion is the linear bottom-up/top-down style: question-guided attention over
the K relation-aware region rows (scores from a small MLP on the elementwise
product of projected region and question vectors), then the joint vector is
the elementwise product of projections of the attended visual vector and the
question.

The answer head is a two-layer MLP producing one logit per candidate answer;
binary cross entropy treats each answer as an independent soft target. For
ensembling, per-model sigmoid scores are normalized to sum to one so the
mixture is a convex combination of genuine distributions.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ParamStore, ValidationError


def _add_linear(store: ParamStore, rng, name: str, rows: int, cols: int, weight_norm: bool):
    w = store.add(f"{name}.W", ad.glorot(rng, (rows, cols)))
    store.add(f"{name}.b", np.zeros(rows))
    if weight_norm:
        store.add(f"{name}.W.g", np.sqrt((w.value**2).sum(axis=1)))


def init_fusion_params(store: ParamStore, rng, d_v: int, d_q: int, d_j: int, prefix: str = "fus", weight_norm: bool = False):
    _add_linear(store, rng, f"{prefix}.att_v", d_j, d_v, weight_norm)
    _add_linear(store, rng, f"{prefix}.att_q", d_j, d_q, weight_norm)
    _add_linear(store, rng, f"{prefix}.att_score", 1, d_j, weight_norm)
    _add_linear(store, rng, f"{prefix}.joint_v", d_j, d_v, weight_norm)
    _add_linear(store, rng, f"{prefix}.joint_q", d_j, d_q, weight_norm)


def init_classifier_params(store: ParamStore, rng, d_j: int, d_mlp: int, n_answers: int, prefix: str = "clf", weight_norm: bool = False):
    _add_linear(store, rng, f"{prefix}.l1", d_mlp, d_j, weight_norm)
    _add_linear(store, rng, f"{prefix}.l2", n_answers, d_mlp, weight_norm)


def _maybe_weight_normed(store: ParamStore, name: str, weight_norm: bool) -> Node:
    if not weight_norm:
        return store[name]
    return ad.weight_normed(store[name], store[f"{name}.g"])


def fuse_butd(
    vstar: Node,
    q: Node,
    store: ParamStore,
    prefix: str = "fus",
    weight_norm: bool = False,
    dropout_mask: np.ndarray | None = None,
) -> Node:
    """Joint vector J = proj(attended v*) * proj(q), attention guided by q."""
    k = vstar.value.shape[0]
    d_q = q.value.shape[0]
    q_row = ad.reshape(q, (1, d_q))

    def lin(x, name):
        return ad.linear(x, _maybe_weight_normed(store, f"{name}.W", weight_norm), store[f"{name}.b"])

    pv = lin(vstar, f"{prefix}.att_v")
    pq = ad.matmul(ad.constant(np.ones((k, 1))), lin(q_row, f"{prefix}.att_q"))
    gate = ad.relu(ad.mul(pv, pq))
    scores = ad.reshape(lin(gate, f"{prefix}.att_score"), (k,))
    weights = ad.softmax_masked(scores, np.ones(k, dtype=bool))
    attended = ad.matmul(ad.reshape(weights, (1, k)), vstar)
    joint = ad.mul(lin(attended, f"{prefix}.joint_v"), lin(q_row, f"{prefix}.joint_q"))
    joint = ad.reshape(joint, (joint.value.shape[1],))
    if dropout_mask is not None:
        joint = ad.mul(joint, ad.constant(dropout_mask))
    return joint


def predict(
    joint: Node,
    store: ParamStore,
    prefix: str = "clf",
    weight_norm: bool = False,
    dropout_mask: np.ndarray | None = None,
) -> Node:
    """Answer logits: linear -> ReLU -> linear, no terminal nonlinearity."""
    row = ad.reshape(joint, (1, joint.value.shape[0]))
    hidden = ad.relu(ad.linear(row, _maybe_weight_normed(store, f"{prefix}.l1.W", weight_norm), store[f"{prefix}.l1.b"]))
    if dropout_mask is not None:
        hidden = ad.mul(hidden, ad.constant(dropout_mask.reshape(1, -1)))
    logits = ad.linear(hidden, _maybe_weight_normed(store, f"{prefix}.l2.W", weight_norm), store[f"{prefix}.l2.b"])
    return ad.reshape(logits, (logits.value.shape[1],))


def bce_loss(logits: Node, targets) -> Node:
    """Mean over answers of -[t log s(z) + (1-t) log(1-s(z))], in stable form."""
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != logits.value.shape:
        raise ValidationError(f"targets shape {t.shape} != logits shape {logits.value.shape}")
    if np.any(t < 0) or np.any(t > 1):
        raise ValidationError("bce targets must lie in [0, 1]")
    z = logits.value
    # -t*log(sigmoid) - (1-t)*log(1-sigmoid) == softplus(z) - t*z, stabilized
    value = np.asarray((np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - t * z).mean())
    n = z.size

    def rule(g):
        s = np.empty_like(z)
        p = z >= 0
        s[p] = 1.0 / (1.0 + np.exp(-z[p]))
        e = np.exp(z[~p])
        s[~p] = e / (1.0 + e)
        return (g / n) * (s - t)

    return ad._make_node(value, [(logits, rule)])


def answer_distribution(logits: np.ndarray) -> np.ndarray:
    """Per-answer sigmoid scores normalized to a distribution."""
    z = np.asarray(logits, dtype=np.float64)
    s = np.empty_like(z)
    p = z >= 0
    s[p] = 1.0 / (1.0 + np.exp(-z[p]))
    e = np.exp(z[~p])
    s[~p] = e / (1.0 + e)
    return s / s.sum()


def ensemble(p_sem: np.ndarray, p_spa: np.ndarray, p_imp: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Convex mix alpha * semantic + beta * spatial + (1 - alpha - beta) * implicit."""
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0 and 0.0 <= alpha + beta <= 1.0):
        raise ValidationError(f"ensemble weights must satisfy 0 <= alpha, beta, alpha+beta <= 1; got {alpha}, {beta}")
    p_sem, p_spa, p_imp = (np.asarray(p) for p in (p_sem, p_spa, p_imp))
    if not (p_sem.shape == p_spa.shape == p_imp.shape):
        raise ValidationError("ensemble inputs must have identical lengths")
    return alpha * p_sem + beta * p_spa + (1.0 - alpha - beta) * p_imp


def argmax_answer(probs: np.ndarray) -> int:
    """Index of the most probable answer; ties break toward the lowest index."""
    return int(np.argmax(probs))


def vqa_accuracy(pred_answer: str, answer_counts: dict[str, int]) -> float:
    """min(1, times the predicted answer was given / 3)."""
    count = answer_counts.get(pred_answer, 0)
    if count < 0:
        raise ValidationError(f"negative answer count for {pred_answer!r}")
    return min(1.0, count / 3.0)
