"""Question encoding: token ids -> learned embeddings -> bidirectional GRU ->
self-attention pooling over the hidden states.

The pooled vector has dimension d_q; each GRU direction runs at d_q/2 and the
per-step states are concatenated, so no extra projection is needed. Pad
positions contribute zero embeddings and are masked out of the pooling
softmax, which makes the output exactly invariant to whatever sits in the pad
tail.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ConfigError, Node, ParamStore, ValidationError

PAD_ID = 0
UNK_ID = 1


class Vocabulary:
    """token -> id map; id 0 is reserved for padding, id 1 for unknown tokens."""

    def __init__(self, token_to_id: dict[str, int]):
        for tok, idx in token_to_id.items():
            if idx in (PAD_ID, UNK_ID):
                raise ValidationError(f"token {tok!r} uses reserved id {idx}")
        self.token_to_id = dict(token_to_id)

    @classmethod
    def from_tokens(cls, tokens) -> "Vocabulary":
        mapping = {}
        next_id = UNK_ID + 1
        for tok in tokens:
            if tok not in mapping:
                mapping[tok] = next_id
                next_id += 1
        return cls(mapping)

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path) as fh:
            return cls(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.token_to_id, fh, indent=1, sort_keys=True)

    def __len__(self) -> int:
        return max(self.token_to_id.values(), default=UNK_ID) + 1

    def encode(self, tokens, max_len: int) -> "TokenSequence":
        ids = [self.token_to_id.get(t, UNK_ID) for t in tokens[:max_len]]
        mask = [True] * len(ids)
        while len(ids) < max_len:
            ids.append(PAD_ID)
            mask.append(False)
        return TokenSequence(ids=ids, mask=mask)


@dataclass
class TokenSequence:
    """Fixed-length id sequence with an end-padded validity mask."""

    ids: list[int]
    mask: list[bool]

    def __post_init__(self):
        if len(self.ids) != len(self.mask):
            raise ValidationError("ids and mask lengths differ")

    @property
    def n_real(self) -> int:
        return sum(self.mask)


@dataclass
class GruCellParams:
    w_z: Node
    u_z: Node
    b_z: Node
    w_r: Node
    u_r: Node
    b_r: Node
    w_c: Node
    u_c: Node
    b_c: Node


def init_gru_params(store: ParamStore, rng: np.random.Generator, d_in: int, d_hidden: int, prefix: str) -> GruCellParams:
    def mat(name, rows, cols):
        return store.add(f"{prefix}.{name}", ad.glorot(rng, (rows, cols)))

    def vec(name, n):
        return store.add(f"{prefix}.{name}", np.zeros(n))

    return GruCellParams(
        w_z=mat("Wz", d_hidden, d_in),
        u_z=mat("Uz", d_hidden, d_hidden),
        b_z=vec("bz", d_hidden),
        w_r=mat("Wr", d_hidden, d_in),
        u_r=mat("Ur", d_hidden, d_hidden),
        b_r=vec("br", d_hidden),
        w_c=mat("Wc", d_hidden, d_in),
        u_c=mat("Uc", d_hidden, d_hidden),
        b_c=vec("bc", d_hidden),
    )


def _sigma(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def gru_step(x: Node, h_prev: Node, params: GruCellParams) -> Node:
    """One GRU step on vectors: h = (1 - z) * h_prev + z * c.

    z and r are sigmoid gates, the candidate c is a tanh of the reset-gated
    state. Implemented as a single fused node with a hand-derived backward.
    """
    p = params
    xv, hv = x.value, h_prev.value
    if xv.ndim != 1 or hv.ndim != 1 or p.w_z.value.shape != (hv.shape[0], xv.shape[0]):
        raise ConfigError(
            f"gru_step dimension mismatch: x {xv.shape}, h {hv.shape}, Wz {p.w_z.value.shape}"
        )
    z = _sigma(p.w_z.value @ xv + p.u_z.value @ hv + p.b_z.value)
    r = _sigma(p.w_r.value @ xv + p.u_r.value @ hv + p.b_r.value)
    rh = r * hv
    c = np.tanh(p.w_c.value @ xv + p.u_c.value @ rh + p.b_c.value)
    out = (1.0 - z) * hv + z * c

    def backward_fn(g):
        dz = g * (c - hv)
        dc = g * z
        dh = g * (1.0 - z)
        dpre_c = dc * (1.0 - c * c)
        drh = p.u_c.value.T @ dpre_c
        dr = drh * hv
        dh = dh + drh * r
        dpre_r = dr * r * (1.0 - r)
        dh = dh + p.u_r.value.T @ dpre_r
        dpre_z = dz * z * (1.0 - z)
        dh = dh + p.u_z.value.T @ dpre_z
        dx = p.w_z.value.T @ dpre_z + p.w_r.value.T @ dpre_r + p.w_c.value.T @ dpre_c
        return [
            dx,
            dh,
            np.outer(dpre_z, xv),
            np.outer(dpre_z, hv),
            dpre_z,
            np.outer(dpre_r, xv),
            np.outer(dpre_r, hv),
            dpre_r,
            np.outer(dpre_c, xv),
            np.outer(dpre_c, rh),
            dpre_c,
        ]

    parents = [x, h_prev, p.w_z, p.u_z, p.b_z, p.w_r, p.u_r, p.b_r, p.w_c, p.u_c, p.b_c]
    return ad.fused(out, parents, backward_fn)


def init_question_params(store: ParamStore, rng: np.random.Generator, vocab_size: int, d_w: int, d_q: int, prefix: str = "qenc"):
    if d_q % 2 != 0:
        raise ConfigError(f"d_q must be even to split across GRU directions, got {d_q}")
    store.add(f"{prefix}.embed", ad.glorot(rng, (vocab_size, d_w)))
    init_gru_params(store, rng, d_w, d_q // 2, f"{prefix}.fwd")
    init_gru_params(store, rng, d_w, d_q // 2, f"{prefix}.bwd")
    store.add(f"{prefix}.att.score", ad.glorot(rng, (d_q, 1)))


def _cell(store: ParamStore, prefix: str) -> GruCellParams:
    return GruCellParams(
        w_z=store[f"{prefix}.Wz"],
        u_z=store[f"{prefix}.Uz"],
        b_z=store[f"{prefix}.bz"],
        w_r=store[f"{prefix}.Wr"],
        u_r=store[f"{prefix}.Ur"],
        b_r=store[f"{prefix}.br"],
        w_c=store[f"{prefix}.Wc"],
        u_c=store[f"{prefix}.Uc"],
        b_c=store[f"{prefix}.bc"],
    )


def encode_question(tokens: TokenSequence, store: ParamStore, prefix: str = "qenc") -> Node:
    """Pooled question vector: softmax(score(h_t)) weighted sum of GRU states."""
    mask = np.asarray(tokens.mask, dtype=bool)
    if not mask.any():
        raise ValidationError("cannot encode an all-pad token sequence")
    max_len = len(tokens.ids)
    embed = store[f"{prefix}.embed"]
    d_w = embed.value.shape[1]
    d_half = store[f"{prefix}.fwd.Wz"].value.shape[0]

    rows = ad.take_rows(embed, tokens.ids)
    rows = ad.mul(rows, ad.constant(np.repeat(mask[:, None], d_w, axis=1).astype(np.float64)))
    xs = [ad.reshape(ad.slice_axis(rows, 0, t, t + 1), (d_w,)) for t in range(max_len)]

    fwd_cell = _cell(store, f"{prefix}.fwd")
    bwd_cell = _cell(store, f"{prefix}.bwd")
    h = ad.constant(np.zeros(d_half))
    fwd_states = []
    for t in range(max_len):
        h = gru_step(xs[t], h, fwd_cell)
        fwd_states.append(h)
    h = ad.constant(np.zeros(d_half))
    bwd_states: list[Node] = [None] * max_len
    for t in reversed(range(max_len)):
        h = gru_step(xs[t], h, bwd_cell)
        bwd_states[t] = h

    states = ad.concat([ad.stack_rows(fwd_states), ad.stack_rows(bwd_states)], axis=1)  # (max_len, d_q)
    scores = ad.reshape(ad.matmul(states, store[f"{prefix}.att.score"]), (max_len,))
    weights = ad.softmax_masked(scores, mask)
    pooled = ad.matmul(ad.reshape(weights, (1, max_len)), states)
    return ad.reshape(pooled, (2 * d_half,))
