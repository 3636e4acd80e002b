"""Adamax optimization, training and evaluation loops, metrics logging.

Training is reproducible from the config seed alone: parameter init, batch
shuffling, and dropout each draw from their own seeded stream. Evaluation
never uses dropout, so repeated runs are bit-identical given a checkpoint.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, save_checkpoint
from .config import RunConfig, lr_at
from .data import VqaExample, load_answer_index
from .fusion import answer_distribution, argmax_answer, ensemble, vqa_accuracy
from .model import PreparedExample, RelationModel, prepare_example
from .question import Vocabulary

logger = logging.getLogger(__name__)


class NonFiniteGradError(RuntimeError):
    """A gradient turned non-finite; the optimizer refuses to step."""


@dataclass
class OptimizerState:
    """Adamax state: first moment m and infinity-norm u per parameter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    u: dict[str, np.ndarray] = field(default_factory=dict)


def adamax_step(params: ParamStore, grads: dict[str, np.ndarray], state: OptimizerState, lr: float) -> None:
    """m <- b1 m + (1-b1) g; u <- max(b2 u, |g|); p <- p - lr/(1-b1^t) * m/(u+eps)."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradError(f"non-finite gradient for parameter {name!r}; step aborted")
    state.t += 1
    correction = 1.0 - state.beta1**state.t
    for name, node in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(node.value)
            state.m[name] = m
            state.u[name] = np.zeros_like(node.value)
        u = state.u[name]
        m[...] = state.beta1 * m + (1.0 - state.beta1) * g
        u[...] = np.maximum(state.beta2 * u, np.abs(g))
        node.value = node.value - (lr / correction) * m / (u + state.eps)


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    train_acc: float
    val_acc: float
    lr: float


@dataclass
class TrainResult:
    metrics: list[EpochMetrics]
    checkpoint_path: str
    best_val_acc: float
    aborted: bool = False


def prepare_all(examples: list[VqaExample], cfg: RunConfig, vocab: Vocabulary, answer_index: dict[str, int], kind: str) -> list[PreparedExample]:
    return [prepare_example(ex, cfg, vocab, answer_index, kind) for ex in examples]


def _accuracy(model: RelationModel, prepared: list[PreparedExample], answers: list[str]) -> float:
    total = 0.0
    for ex in prepared:
        probs = model.predict_probs(ex)
        total += vqa_accuracy(answers[argmax_answer(probs)], ex.answers)
    return total / max(1, len(prepared))


def write_metrics_csv(path: str, metrics: list[EpochMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "train_acc", "val_acc", "lr"])
        for row in metrics:
            writer.writerow(
                [row.epoch, f"{row.loss:.17g}", f"{row.train_acc:.17g}", f"{row.val_acc:.17g}", f"{row.lr:.17g}"]
            )


def train(
    cfg: RunConfig,
    kind: str,
    train_examples: list[VqaExample],
    val_examples: list[VqaExample],
    vocab: Vocabulary,
    answer_index: dict[str, int],
    out_dir: str,
) -> TrainResult:
    """Train one single-relation model; saves the best-validation checkpoint."""
    if not train_examples:
        raise ad.ValidationError("training dataset is empty")
    os.makedirs(out_dir, exist_ok=True)
    answers = [a for a, _ in sorted(answer_index.items(), key=lambda kv: kv[1])]
    train_prep = prepare_all(train_examples, cfg, vocab, answer_index, kind)
    val_prep = prepare_all(val_examples, cfg, vocab, answer_index, kind)

    init_rng = np.random.default_rng([cfg.seed, 0])
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    dropout_rng = np.random.default_rng([cfg.seed, 2])

    model = RelationModel(cfg, kind, len(vocab), len(answer_index), rng=init_rng)
    state = OptimizerState()
    schedule = cfg.schedule()
    checkpoint_path = os.path.join(out_dir, "checkpoint.json")
    metrics: list[EpochMetrics] = []
    best_val = -1.0
    aborted = False

    for epoch in range(cfg.epochs):
        lr = lr_at(schedule, epoch)
        order = shuffle_rng.permutation(len(train_prep))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_prep[i] for i in order[start : start + cfg.batch_size]]
            total = None
            for ex in batch:
                term = model.loss(ex, dropout_rng)
                total = term if total is None else ad.add(total, term)
            batch_loss = ad.scale(total, 1.0 / len(batch))
            if not np.isfinite(batch_loss.value):
                logger.error("non-finite loss at epoch %d; aborting with last saved checkpoint", epoch)
                aborted = True
                break
            model.params.zero_grad()
            grads = ad.backward(batch_loss, model.params)
            adamax_step(model.params, grads, state, lr)
            losses.append(float(batch_loss.value))
        if aborted:
            break
        train_acc = _accuracy(model, train_prep, answers)
        val_acc = _accuracy(model, val_prep, answers) if val_prep else train_acc
        metrics.append(EpochMetrics(epoch=epoch, loss=float(np.mean(losses)), train_acc=train_acc, val_acc=val_acc, lr=lr))
        if val_acc > best_val:
            best_val = val_acc
            save_checkpoint(model.params, checkpoint_path)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metrics)
    return TrainResult(metrics=metrics, checkpoint_path=checkpoint_path, best_val_acc=best_val, aborted=aborted)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class Prediction:
    question_id: str
    answer: str
    probs_topk: list[tuple[str, float]]

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "answer": self.answer,
            "probs_topk": [[a, p] for a, p in self.probs_topk],
        }


def _topk(probs: np.ndarray, answers: list[str], k: int = 5) -> list[tuple[str, float]]:
    order = np.argsort(-probs, kind="stable")[:k]
    return [(answers[i], float(probs[i])) for i in order]


def evaluate_probs(
    probs_fn,
    prepared: list[PreparedExample],
    answers: list[str],
) -> tuple[float, list[Prediction]]:
    total = 0.0
    predictions = []
    for ex in prepared:
        probs = probs_fn(ex)
        idx = argmax_answer(probs)
        total += vqa_accuracy(answers[idx], ex.answers)
        predictions.append(Prediction(question_id=ex.question_id, answer=answers[idx], probs_topk=_topk(probs, answers)))
    return total / max(1, len(prepared)), predictions


def evaluate_model(model: RelationModel, prepared: list[PreparedExample], answers: list[str]):
    return evaluate_probs(model.predict_probs, prepared, answers)


def evaluate_ensemble(
    models: dict[str, RelationModel],
    prepared: dict[str, list[PreparedExample]],
    answers: list[str],
    alpha: float,
    beta: float,
):
    """Mix the three per-kind answer distributions; inputs are index-aligned."""
    n = len(prepared["semantic"])
    mixed = []
    for i in range(n):
        p_sem = models["semantic"].predict_probs(prepared["semantic"][i])
        p_spa = models["spatial"].predict_probs(prepared["spatial"][i])
        p_imp = models["implicit"].predict_probs(prepared["implicit"][i])
        mixed.append(ensemble(p_sem, p_spa, p_imp, alpha, beta))
    total = 0.0
    predictions = []
    for ex, probs in zip(prepared["semantic"], mixed):
        idx = argmax_answer(probs)
        total += vqa_accuracy(answers[idx], ex.answers)
        predictions.append(Prediction(question_id=ex.question_id, answer=answers[idx], probs_topk=_topk(probs, answers)))
    return total / max(1, n), predictions


def dump_predictions(path: str, predictions: list[Prediction]) -> None:
    import json

    with open(path, "w") as fh:
        for pred in predictions:
            fh.write(json.dumps(pred.to_dict()))
            fh.write("\n")


def load_vocab_and_answers(cfg: RunConfig) -> tuple[Vocabulary, dict[str, int]]:
    if not cfg.vocab_file or not cfg.answers_file:
        raise ad.ValidationError("config must set vocab_file and answers_file")
    return Vocabulary.load(cfg.vocab_file), load_answer_index(cfg.answers_file)
