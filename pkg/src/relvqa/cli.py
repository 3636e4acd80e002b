"""Command-line entry point.

Commands: extract-graph, generate, train, eval, gradcheck, dump-attention.
Flags override config-file values, which override defaults. Exit codes:
0 success, 1 internal or check failure, 2 input validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .autodiff import ConfigError, DimensionError, ValidationError, load_checkpoint
from .config import RunConfig
from .data import load_dataset, write_dataset_files
from .geometry import BBox
from .graphs import RegionSet
from .model import RelationModel, build_graph, gradcheck_dims, full_pipeline_gradcheck, prepare_example
from .training import (
    dump_predictions,
    evaluate_ensemble,
    evaluate_model,
    load_vocab_and_answers,
    prepare_all,
    train,
)

GRADCHECK_LIMIT = 1e-4


def _load_config(args, **overrides) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return cfg.with_overrides(overrides) if overrides else cfg


def _cmd_extract_graph(args) -> int:
    with open(args.boxes) as fh:
        raw = json.load(fh)
    boxes = [BBox(*map(float, b)) for b in raw["boxes"]]
    triples = [tuple(int(v) for v in t) for t in raw.get("triples", [])]
    features = np.zeros((len(boxes), 1))
    cfg = _load_config(args, far_threshold=args.far_threshold)
    graph = build_graph(RegionSet(features=features, boxes=boxes), args.kind, cfg, triples)
    payload = graph.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def _cmd_generate(args) -> int:
    train_set, val_set = write_dataset_files(
        args.out, seed=args.seed, n_train=args.n, n_val=args.n_val, k=args.k, far_threshold=args.far_threshold
    )
    print(f"wrote {len(train_set)} train and {len(val_set)} val examples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(
        args, seed=args.seed, epochs=args.epochs, batch_size=args.batch_size,
        attention=None if args.no_attention is False else False,
        q_adaptive=None if args.no_q_adaptive is False else False,
    )
    vocab, answer_index = load_vocab_and_answers(cfg)
    train_examples = load_dataset(cfg.train_file)
    val_examples = load_dataset(cfg.val_file) if cfg.val_file else []
    result = train(cfg, args.kind, train_examples, val_examples, vocab, answer_index, args.out)
    if result.metrics:
        last = result.metrics[-1]
        print(f"epochs={len(result.metrics)} final_train_acc={last.train_acc:.4f} best_val_acc={result.best_val_acc:.4f}")
    if result.aborted:
        print("training aborted on non-finite loss; last good checkpoint retained", file=sys.stderr)
        return 1
    return 0


def _load_model(cfg: RunConfig, kind: str, vocab, answer_index, checkpoint: str) -> RelationModel:
    model = RelationModel(cfg, kind, len(vocab), len(answer_index), rng=np.random.default_rng(cfg.seed))
    load_checkpoint(model.params, checkpoint)
    return model


def _cmd_eval(args) -> int:
    cfg = _load_config(args, ensemble_alpha=args.alpha, ensemble_beta=args.beta)
    vocab, answer_index = load_vocab_and_answers(cfg)
    answers = [a for a, _ in sorted(answer_index.items(), key=lambda kv: kv[1])]
    examples = load_dataset(args.data if args.data else cfg.val_file)
    checkpoints = args.checkpoint
    if len(checkpoints) == 1:
        model = _load_model(cfg, args.kind, vocab, answer_index, checkpoints[0])
        prepared = prepare_all(examples, cfg, vocab, answer_index, args.kind)
        acc, predictions = evaluate_model(model, prepared, answers)
    elif len(checkpoints) == 3:
        kinds = ("semantic", "spatial", "implicit")
        models = {k: _load_model(cfg, k, vocab, answer_index, c) for k, c in zip(kinds, checkpoints)}
        prepared = {k: prepare_all(examples, cfg, vocab, answer_index, k) for k in kinds}
        acc, predictions = evaluate_ensemble(models, prepared, answers, cfg.ensemble_alpha, cfg.ensemble_beta)
    else:
        raise ValidationError("eval needs exactly 1 checkpoint (single model) or 3 (semantic, spatial, implicit)")
    if args.dump:
        dump_predictions(args.dump, predictions)
    print(f"accuracy={acc:.6f} over {len(examples)} examples")
    return 0


def _cmd_gradcheck(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else gradcheck_dims()
    started = time.monotonic()
    report = full_pipeline_gradcheck(cfg, step=args.step)
    elapsed = time.monotonic() - started
    for line in report.format_lines():
        print(line)
    print(f"elapsed={elapsed:.1f}s")
    return 0 if report.max_rel_err <= GRADCHECK_LIMIT else 1


def _cmd_dump_attention(args) -> int:
    cfg = _load_config(args)
    vocab, answer_index = load_vocab_and_answers(cfg)
    examples = load_dataset(args.data if args.data else cfg.val_file)
    if not (0 <= args.index < len(examples)):
        raise ValidationError(f"example index {args.index} outside 0..{len(examples) - 1}")
    model = _load_model(cfg, args.kind, vocab, answer_index, args.checkpoint)
    ex = prepare_example(examples[args.index], cfg, vocab, answer_index, args.kind)
    maps = model.attention_maps(ex)
    payload = json.dumps(
        {
            "question_id": ex.question_id,
            "kind": args.kind,
            "K": ex.regions.k,
            "heads": [m.tolist() for m in maps],
        }
    )
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relvqa", description="Relation-aware graph attention VQA toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-graph", help="build a relation graph from a boxes file and dump it as JSON")
    p.add_argument("--boxes", required=True, help='JSON file: {"boxes": [[x,y,w,h],...], "triples": [[i,p,j],...]}')
    p.add_argument("--kind", required=True, choices=("implicit", "spatial", "semantic"))
    p.add_argument("--config", default=None)
    p.add_argument("--far-threshold", type=float, default=None, dest="far_threshold")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_extract_graph)

    p = sub.add_parser("generate", help="write a seeded synthetic dataset (train/val/vocab/answers)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--n-val", type=int, default=60, dest="n_val")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--far-threshold", type=float, default=4.0, dest="far_threshold")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("train", help="train one single-relation model")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", required=True, choices=("implicit", "spatial", "semantic"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--no-attention", action="store_true", dest="no_attention")
    p.add_argument("--no-q-adaptive", action="store_true", dest="no_q_adaptive")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint, or ensemble three (semantic, spatial, implicit)")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", default="semantic", choices=("implicit", "spatial", "semantic"))
    p.add_argument("--checkpoint", action="append", required=True, help="repeat for ensemble: sem, spa, imp order")
    p.add_argument("--data", default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--dump", default=None)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference audit of the full pipeline; exit 1 on failure")
    p.add_argument("--config", default=None)
    p.add_argument("--step", type=float, default=3e-4)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("dump-attention", help="dump per-head attention matrices for one example")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", required=True, choices=("implicit", "spatial", "semantic"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_dump_attention)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, ConfigError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
