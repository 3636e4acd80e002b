"""End-to-end tests of the command-line interface (in-process, via main())."""

import json
import os

import numpy as np
import pytest

from relvqa import autodiff as ad
from relvqa.cli import build_parser, main
from relvqa.config import RunConfig


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh)
    return str(path)


@pytest.fixture
def boxes_file(tmp_path):
    return write_json(
        tmp_path / "boxes.json",
        {"boxes": [[0, 0, 10, 10], [2, 2, 2, 2], [40, 40, 3, 3]], "triples": [[0, 1, 1]]},
    )


TINY_DIMS = dict(
    d_v=4, d_q=4, d_w=3, d_h=8, d_j=4, d_mlp=4, n_heads=2, max_regions=3, max_len=4, seed=1
)


class TestExtractGraph:
    def test_spatial_dump_matches_builder(self, tmp_path, boxes_file, capsys):
        out = str(tmp_path / "graph.json")
        assert main(["extract-graph", "--boxes", boxes_file, "--kind", "spatial", "--out", out]) == 0
        with open(out) as fh:
            payload = json.load(fh)
        assert payload["kind"] == "spatial" and payload["K"] == 3
        from relvqa.geometry import BBox
        from relvqa.graphs import RegionSet, build_spatial

        regions = RegionSet(features=np.zeros((3, 1)), boxes=[BBox(0, 0, 10, 10), BBox(2, 2, 2, 2), BBox(40, 40, 3, 3)])
        expected = build_spatial(regions).to_json_dict()
        assert payload == json.loads(json.dumps(expected))

    def test_semantic_uses_triples(self, boxes_file, capsys):
        assert main(["extract-graph", "--boxes", boxes_file, "--kind", "semantic"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert [0, 1, 1, "out"] in payload["edges"]

    def test_degenerate_box_is_validation_exit_2(self, tmp_path, capsys):
        bad = write_json(tmp_path / "bad.json", {"boxes": [[0, 0, 0, 1]]})
        assert main(["extract-graph", "--boxes", bad, "--kind", "spatial"]) == 2
        assert "degenerate" in capsys.readouterr().err

    def test_missing_file_is_internal_exit_1(self, capsys):
        assert main(["extract-graph", "--boxes", "/nonexistent.json", "--kind", "spatial"]) == 1


class TestGenerate:
    def test_writes_all_files(self, tmp_path, capsys):
        out = str(tmp_path / "data")
        assert main(["generate", "--seed", "3", "--n", "10", "--n-val", "5", "--out", out]) == 0
        for name in ("train.jsonl", "val.jsonl", "vocab.json", "answers.json"):
            assert os.path.exists(os.path.join(out, name))

    def test_byte_identical_for_same_seed(self, tmp_path):
        out1, out2 = str(tmp_path / "d1"), str(tmp_path / "d2")
        main(["generate", "--seed", "4", "--n", "10", "--n-val", "4", "--out", out1])
        main(["generate", "--seed", "4", "--n", "10", "--n-val", "4", "--out", out2])
        for name in ("train.jsonl", "val.jsonl", "vocab.json", "answers.json"):
            with open(os.path.join(out1, name), "rb") as f1, open(os.path.join(out2, name), "rb") as f2:
                assert f1.read() == f2.read(), name


@pytest.fixture
def trained_run(tmp_path):
    data_dir = str(tmp_path / "data")
    main(["generate", "--seed", "5", "--n", "12", "--n-val", "6", "--out", data_dir])
    cfg_path = write_json(
        tmp_path / "config.json",
        {
            "epochs": 2,
            "batch_size": 4,
            "seed": 2,
            "max_regions": 6,
            "vocab_file": os.path.join(data_dir, "vocab.json"),
            "answers_file": os.path.join(data_dir, "answers.json"),
            "train_file": os.path.join(data_dir, "train.jsonl"),
            "val_file": os.path.join(data_dir, "val.jsonl"),
        },
    )
    run_dir = str(tmp_path / "run")
    code = main(["train", "--config", cfg_path, "--kind", "semantic", "--out", run_dir])
    return code, cfg_path, run_dir, data_dir


class TestTrainEval:
    def test_train_then_eval_and_dump(self, tmp_path, trained_run, capsys):
        code, cfg_path, run_dir, data_dir = trained_run
        assert code == 0
        checkpoint = os.path.join(run_dir, "checkpoint.json")
        dump = str(tmp_path / "preds.jsonl")
        assert main(["eval", "--config", cfg_path, "--kind", "semantic", "--checkpoint", checkpoint, "--dump", dump]) == 0
        out = capsys.readouterr().out
        assert "accuracy=" in out
        with open(dump) as fh:
            lines = [json.loads(line) for line in fh]
        assert lines and set(lines[0]) == {"question_id", "answer", "probs_topk"}
        assert len(lines[0]["probs_topk"]) == 5

    def test_eval_dumps_are_bit_identical(self, tmp_path, trained_run):
        _, cfg_path, run_dir, _ = trained_run
        checkpoint = os.path.join(run_dir, "checkpoint.json")
        d1, d2 = str(tmp_path / "p1.jsonl"), str(tmp_path / "p2.jsonl")
        main(["eval", "--config", cfg_path, "--kind", "semantic", "--checkpoint", checkpoint, "--dump", d1])
        main(["eval", "--config", cfg_path, "--kind", "semantic", "--checkpoint", checkpoint, "--dump", d2])
        with open(d1, "rb") as f1, open(d2, "rb") as f2:
            assert f1.read() == f2.read()

    def test_eval_wrong_checkpoint_count_exit_2(self, trained_run, capsys):
        _, cfg_path, run_dir, _ = trained_run
        checkpoint = os.path.join(run_dir, "checkpoint.json")
        assert main(["eval", "--config", cfg_path, "--checkpoint", checkpoint, "--checkpoint", checkpoint]) == 2

    def test_dump_attention(self, tmp_path, trained_run):
        _, cfg_path, run_dir, data_dir = trained_run
        out = str(tmp_path / "attention.json")
        code = main(
            [
                "dump-attention", "--config", cfg_path, "--kind", "semantic",
                "--checkpoint", os.path.join(run_dir, "checkpoint.json"),
                "--data", os.path.join(data_dir, "val.jsonl"), "--index", "0", "--out", out,
            ]
        )
        assert code == 0
        with open(out) as fh:
            payload = json.load(fh)
        cfg = RunConfig.from_file(cfg_path)
        assert len(payload["heads"]) == cfg.n_heads
        for head in payload["heads"]:
            rows = np.asarray(head)
            np.testing.assert_allclose(rows.sum(axis=1), np.ones(payload["K"]), atol=1e-10)

    def test_invalid_config_key_named_in_error(self, tmp_path, capsys):
        bad_cfg = write_json(tmp_path / "bad.json", {"d_vq": 12})
        assert main(["train", "--config", bad_cfg, "--kind", "semantic", "--out", str(tmp_path / "x")]) == 2
        assert "d_vq" in capsys.readouterr().err


class TestGradcheckCommand:
    def test_tiny_config_passes(self, tmp_path, capsys):
        cfg_path = write_json(tmp_path / "config.json", TINY_DIMS)
        assert main(["gradcheck", "--config", cfg_path]) == 0
        out = capsys.readouterr().out
        assert "max_rel_err=" in out
        # the report lists every registered parameter of all three models
        for name in ("sem.qenc.embed", "spa.enc.head0.U", "imp.enc.head0.w", "sem.clf.l2.W"):
            assert name in out

    def test_corrupted_backward_rule_fails(self, tmp_path, monkeypatch, capsys):
        real = ad.matmul

        def corrupted(a, b):
            node = real(a, b)
            if node.parents:
                (pa, ra), rest = node.parents[0], node.parents[1:]
                node.parents = ((pa, lambda g: 1.5 * ra(g)),) + tuple(rest)
            return node

        monkeypatch.setattr(ad, "matmul", corrupted)
        cfg_path = write_json(tmp_path / "config.json", TINY_DIMS)
        assert main(["gradcheck", "--config", cfg_path]) == 1


class TestHelp:
    def test_help_enumerates_commands_and_flags(self, capsys):
        parser = build_parser()
        help_text = parser.format_help()
        for cmd in ("extract-graph", "generate", "train", "eval", "gradcheck", "dump-attention"):
            assert cmd in help_text
        with pytest.raises(SystemExit):
            parser.parse_args(["train", "--help"])
        out = capsys.readouterr().out
        for flag in ("--config", "--kind", "--out", "--seed", "--epochs", "--no-attention", "--no-q-adaptive"):
            assert flag in out
