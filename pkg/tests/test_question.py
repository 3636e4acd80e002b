"""Tests for tokenization, the GRU cell, and self-attention pooling."""

import numpy as np
import pytest

from relvqa import autodiff as ad
from relvqa.autodiff import ValidationError
from relvqa.question import (
    GruCellParams,
    PAD_ID,
    TokenSequence,
    UNK_ID,
    Vocabulary,
    encode_question,
    gru_step,
    init_gru_params,
    init_question_params,
)


def make_cell(store, rng, d_in, d_h, prefix="cell"):
    return init_gru_params(store, rng, d_in, d_h, prefix)


class TestVocabulary:
    def test_reserved_ids(self):
        vocab = Vocabulary.from_tokens(["cat", "sat"])
        assert vocab.token_to_id["cat"] == 2
        seq = vocab.encode(["cat", "unknown-token"], max_len=4)
        assert seq.ids == [2, UNK_ID, PAD_ID, PAD_ID]
        assert seq.mask == [True, True, False, False]

    def test_round_trip(self, tmp_path):
        vocab = Vocabulary.from_tokens(["a", "b", "c"])
        path = str(tmp_path / "vocab.json")
        vocab.save(path)
        assert Vocabulary.load(path).token_to_id == vocab.token_to_id

    def test_reserved_id_collision_rejected(self):
        with pytest.raises(ValidationError):
            Vocabulary({"bad": PAD_ID})


class TestGruStep:
    def test_zero_params_zero_state_give_zero(self):
        store = ad.ParamStore()
        rng = np.random.default_rng(0)
        cell = make_cell(store, rng, 3, 4)
        for _, p in store.items():
            p.value = np.zeros_like(p.value)
        out = gru_step(ad.constant(np.zeros(3)), ad.constant(np.zeros(4)), cell)
        np.testing.assert_array_equal(out.value, np.zeros(4))

    def test_saturated_update_gate_keeps_state(self):
        store = ad.ParamStore()
        cell = make_cell(store, np.random.default_rng(1), 3, 4)
        store["cell.bz"].value = np.full(4, -40.0)  # z ~ 0 everywhere
        h_prev = np.array([0.3, -0.6, 1.1, 0.05])
        out = gru_step(ad.constant(np.ones(3)), ad.constant(h_prev), cell)
        np.testing.assert_allclose(out.value, h_prev, atol=1e-12)

    def test_gradcheck_random_cell(self):
        store = ad.ParamStore()
        rng = np.random.default_rng(2)
        cell = make_cell(store, rng, 3, 4)
        x = ad.constant(rng.normal(size=3))
        h = ad.constant(rng.normal(size=4))
        sel = rng.normal(size=4)

        def f(params):
            return ad.reduce_sum(ad.mul(gru_step(x, h, cell), ad.constant(sel)))

        report = ad.gradcheck(f, store, step=1e-5)
        assert report.max_rel_err < 1e-5

    def test_gradient_flows_into_inputs(self):
        store = ad.ParamStore()
        rng = np.random.default_rng(3)
        cell = make_cell(store, rng, 3, 4)
        xstore = ad.ParamStore()
        x = xstore.add("x", rng.normal(size=3))
        h = xstore.add("h", rng.normal(size=4))

        def f(params):
            return ad.reduce_sum(gru_step(params["x"], params["h"], cell))

        report = ad.gradcheck(f, xstore, step=1e-5)
        assert report.max_rel_err < 1e-5

    def test_dimension_mismatch_rejected(self):
        store = ad.ParamStore()
        cell = make_cell(store, np.random.default_rng(4), 3, 4)
        with pytest.raises(ad.ConfigError):
            gru_step(ad.constant(np.zeros(5)), ad.constant(np.zeros(4)), cell)


def small_encoder(seed=0, vocab_size=9, d_w=3, d_q=6, max_len=5):
    store = ad.ParamStore()
    init_question_params(store, np.random.default_rng(seed), vocab_size, d_w, d_q, "qenc")
    return store


class TestEncodeQuestion:
    def test_single_token_pools_to_its_own_state(self):
        store = small_encoder()
        tokens = TokenSequence(ids=[3, 0, 0, 0, 0], mask=[True, False, False, False, False])
        q = encode_question(tokens, store)
        # attention over one valid position must place weight 1 there; the
        # pooled vector equals that position's concatenated state
        embed = store["qenc.embed"]
        from relvqa.question import _cell

        x0 = ad.constant(embed.value[3])
        h_f = gru_step(x0, ad.constant(np.zeros(3)), _cell(store, "qenc.fwd")).value
        assert np.allclose(q.value[:3], h_f, atol=1e-12)

    def test_pad_tail_content_is_irrelevant(self):
        store = small_encoder(seed=5)
        mask = [True, True, False, False, False]
        q1 = encode_question(TokenSequence(ids=[2, 3, 0, 0, 0], mask=mask), store)
        q2 = encode_question(TokenSequence(ids=[2, 3, 7, 8, 5], mask=mask), store)
        np.testing.assert_array_equal(q1.value, q2.value)

    def test_all_pad_rejected(self):
        store = small_encoder()
        with pytest.raises(ValidationError, match="all-pad"):
            encode_question(TokenSequence(ids=[0] * 5, mask=[False] * 5), store)

    def test_output_dimension(self):
        store = small_encoder()
        q = encode_question(TokenSequence(ids=[2, 3, 4, 0, 0], mask=[True] * 3 + [False] * 2), store)
        assert q.value.shape == (6,)

    def test_deterministic(self):
        store = small_encoder(seed=6)
        tokens = TokenSequence(ids=[2, 3, 4, 5, 0], mask=[True] * 4 + [False])
        a = encode_question(tokens, store).value
        b = encode_question(tokens, store).value
        assert a.tobytes() == b.tobytes()

    def test_full_encoder_gradcheck(self):
        store = small_encoder(seed=7)
        tokens = TokenSequence(ids=[2, 3, 4, 0, 0], mask=[True] * 3 + [False] * 2)
        sel = np.random.default_rng(8).normal(size=6)

        def f(params):
            return ad.reduce_sum(ad.mul(encode_question(tokens, params), ad.constant(sel)))

        report = ad.gradcheck(f, store, step=1e-4)
        assert report.max_rel_err < 1e-4

    def test_pad_embedding_rows_get_no_gradient(self):
        store = small_encoder(seed=9)
        tokens = TokenSequence(ids=[2, 3, 0, 0, 0], mask=[True, True, False, False, False])
        store.zero_grad()
        grads = ad.backward(ad.reduce_sum(encode_question(tokens, store)), store)
        np.testing.assert_array_equal(grads["qenc.embed"][PAD_ID], np.zeros(3))
