"""Single-relation VQA model: question encoder -> relation encoder -> fusion
-> two-layer answer head. The three relation kinds share this assembly but
never share parameters; they are trained as independent models and only meet
again in the inference ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import encoders, fusion, question
from .autodiff import Node, ParamStore, ValidationError
from .config import RunConfig
from .data import VqaExample
from .geometry import pair_geometry_embedding
from .graphs import KINDS, RegionSet, RelationGraph, build_implicit, build_semantic, build_spatial
from .question import TokenSequence, Vocabulary


@dataclass
class PreparedExample:
    """Everything per-example that does not depend on parameters, precomputed."""

    question_id: str
    tokens: TokenSequence
    regions: RegionSet
    graph: RelationGraph
    geom_embed: np.ndarray | None
    targets: np.ndarray
    answers: dict[str, int]
    template: str


def build_graph(regions: RegionSet, kind: str, cfg: RunConfig, triples=()) -> RelationGraph:
    if kind == "implicit":
        return build_implicit(regions)
    if kind == "spatial":
        return build_spatial(regions, cfg.far_threshold)
    if kind == "semantic":
        return build_semantic(regions, triples)
    raise ValidationError(f"unknown relation kind {kind!r}; expected one of {KINDS}")


def prepare_example(ex: VqaExample, cfg: RunConfig, vocab: Vocabulary, answer_index: dict[str, int], kind: str) -> PreparedExample:
    if len(ex.boxes) > cfg.max_regions:
        raise ValidationError(f"example {ex.question_id} has {len(ex.boxes)} regions, config allows {cfg.max_regions}")
    regions = RegionSet(features=ex.features, boxes=ex.boxes)
    if regions.d_v != cfg.d_v:
        raise ValidationError(f"example {ex.question_id} has d_v={regions.d_v}, config says {cfg.d_v}")
    graph = build_graph(regions, kind, cfg, ex.triples)
    geom = pair_geometry_embedding(regions.boxes, cfg.d_h, cfg.geom_eps) if kind == "implicit" else None
    targets = np.zeros(len(answer_index))
    for ans, count in ex.answers.items():
        if ans in answer_index:
            targets[answer_index[ans]] = min(1.0, count / 3.0)
    return PreparedExample(
        question_id=ex.question_id,
        tokens=vocab.encode(ex.tokens, cfg.max_len),
        regions=regions,
        graph=graph,
        geom_embed=geom,
        targets=targets,
        answers=dict(ex.answers),
        template=ex.template,
    )


class RelationModel:
    """Parameters plus forward passes for one relation kind."""

    def __init__(self, cfg: RunConfig, kind: str, vocab_size: int, n_answers: int,
                 store: ParamStore | None = None, prefix: str = "", rng=None):
        if kind not in KINDS:
            raise ValidationError(f"unknown relation kind {kind!r}")
        self.cfg = cfg
        self.kind = kind
        self.n_answers = n_answers
        self.prefix = prefix
        self.params = store if store is not None else ParamStore()
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        question.init_question_params(self.params, rng, vocab_size, cfg.d_w, cfg.d_q, f"{prefix}qenc")
        if kind == "implicit":
            encoders.init_implicit_params(self.params, rng, cfg.d_v, cfg.d_q, cfg.d_h, cfg.n_heads, f"{prefix}enc")
        else:
            encoders.init_explicit_params(self.params, rng, kind, cfg.d_v, cfg.d_q, cfg.d_h, cfg.n_heads, f"{prefix}enc")
        fusion.init_fusion_params(self.params, rng, cfg.d_v, cfg.d_q, cfg.d_j, f"{prefix}fus", cfg.weight_norm)
        fusion.init_classifier_params(self.params, rng, cfg.d_j, cfg.d_mlp, n_answers, f"{prefix}clf", cfg.weight_norm)

    def forward_logits(self, ex: PreparedExample, dropout_rng=None) -> Node:
        cfg = self.cfg

        def mask(shape, p):
            if dropout_rng is None or p <= 0:
                return None
            return (dropout_rng.random(shape) >= p) / (1.0 - p)

        q = question.encode_question(ex.tokens, self.params, f"{self.prefix}qenc")
        q_mask = mask(cfg.d_q, cfg.dropout)
        if q_mask is not None:
            q = ad.mul(q, ad.constant(q_mask))
        vstar = encoders.encode_relations(
            ex.regions,
            q,
            ex.graph,
            self.params,
            cfg.n_heads,
            prefix=f"{self.prefix}enc",
            geom_embed=ex.geom_embed,
            geom_eps=cfg.geom_eps,
            attention=cfg.attention,
            q_adaptive=cfg.q_adaptive,
        )
        v_mask = mask((ex.regions.k, cfg.d_v), cfg.dropout)
        if v_mask is not None:
            vstar = ad.mul(vstar, ad.constant(v_mask))
        joint = fusion.fuse_butd(
            vstar,
            q,
            self.params,
            prefix=f"{self.prefix}fus",
            weight_norm=cfg.weight_norm,
            dropout_mask=mask(cfg.d_j, cfg.dropout),
        )
        return fusion.predict(
            joint,
            self.params,
            prefix=f"{self.prefix}clf",
            weight_norm=cfg.weight_norm,
            dropout_mask=mask(cfg.d_mlp, cfg.classifier_dropout),
        )

    def loss(self, ex: PreparedExample, dropout_rng=None) -> Node:
        return fusion.bce_loss(self.forward_logits(ex, dropout_rng), ex.targets)

    def predict_probs(self, ex: PreparedExample) -> np.ndarray:
        return fusion.answer_distribution(self.forward_logits(ex).value)

    def attention_maps(self, ex: PreparedExample) -> list[np.ndarray]:
        q = question.encode_question(ex.tokens, self.params, f"{self.prefix}qenc")
        return encoders.attention_maps(
            ex.regions, q, ex.graph, self.params, self.cfg.n_heads,
            prefix=f"{self.prefix}enc", geom_eps=self.cfg.geom_eps, q_adaptive=self.cfg.q_adaptive,
        )


# ---------------------------------------------------------------------------
# Full-pipeline gradient audit
# ---------------------------------------------------------------------------


def gradcheck_dims() -> RunConfig:
    """Small fixed dimensions for the end-to-end gradient audit."""
    return RunConfig(
        d_v=16, d_q=12, d_w=6, d_h=16, d_j=10, d_mlp=10, n_heads=4,
        max_regions=5, max_len=6, seed=7, dropout=0.0, classifier_dropout=0.0,
    )


def _gradcheck_instance(cfg: RunConfig, rng, kind: str, n_answers: int, vocab_size: int):
    from .geometry import BBox

    k = cfg.max_regions
    boxes = [
        BBox(float(rng.integers(0, 50)), float(rng.integers(0, 50)), float(rng.integers(5, 30)), float(rng.integers(5, 30)))
        for _ in range(k)
    ]
    features = rng.normal(0.0, 0.6, size=(k, cfg.d_v))
    regions = RegionSet(features=features, boxes=boxes)
    # triples chosen to exercise out, in, and the both-directions-present case
    triples = [(0, 1, 1), (1, 2, 2), (3, 3, 4), (4, 7, 3), (2, 5, 0)]
    triples = [t for t in triples if t[0] < k and t[2] < k]
    graph = build_graph(regions, kind, cfg, triples)
    n_real = cfg.max_len - 2
    ids = [int(rng.integers(2, vocab_size)) for _ in range(n_real)] + [0] * (cfg.max_len - n_real)
    tokens = TokenSequence(ids=ids, mask=[True] * n_real + [False] * (cfg.max_len - n_real))
    geom = pair_geometry_embedding(boxes, cfg.d_h, cfg.geom_eps) if kind == "implicit" else None
    targets = rng.uniform(0.05, 0.95, size=n_answers)
    return PreparedExample(
        question_id=f"gradcheck-{kind}",
        tokens=tokens,
        regions=regions,
        graph=graph,
        geom_embed=geom,
        targets=targets,
        answers={},
        template="gradcheck",
    )


def full_pipeline_gradcheck(cfg: RunConfig | None = None, step: float = 3e-4, n_answers: int = 8, vocab_size: int = 12):
    """Gradcheck the whole stack for each relation kind; returns a merged report.

    Every model runs question encoder -> relation encoder -> fusion -> BCE;
    the three models have disjoint parameters, so each is audited against its
    own loss.
    """
    cfg = cfg if cfg is not None else gradcheck_dims()
    merged_err: dict[str, float] = {}
    merged_skip: dict[str, int] = {}
    worst = 0.0
    for kind in KINDS:
        rng = np.random.default_rng(cfg.seed + 100)
        model = RelationModel(cfg, kind, vocab_size, n_answers, prefix=f"{kind[:3]}.", rng=np.random.default_rng(cfg.seed))
        ex = _gradcheck_instance(cfg, rng, kind, n_answers, vocab_size)
        report = ad.gradcheck(lambda params: model.loss(ex), model.params, step=step)
        merged_err.update(report.per_param_err)
        merged_skip.update(report.skipped)
        worst = max(worst, report.max_rel_err)
    return ad.GradCheckReport(max_rel_err=worst, per_param_err=merged_err, skipped=merged_skip)
