import io

import numpy as np
import pytest

from wordorder import kernels, ngramlm


def toy_model():
    corpus = io.StringIO(
        "the cat sat on the mat\n"
        "the cat ran\n"
        "a dog sat on a mat\n"
        "the dog sat\n" * 3
        + "a cat on the mat\n"
    )
    return ngramlm.train(corpus)


def test_backend_is_reported():
    assert kernels.BACKEND in ("compiled", "python")


def test_dep_length_matches_python_fallback():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(1, 30))
        heads = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            heads[i] = int(rng.integers(1, i + 1))
        ordering = rng.permutation(np.arange(1, n + 1)).astype(np.int64)
        expected = kernels.python_backend["dep_length"](heads, ordering)
        assert kernels.dep_length(heads, ordering) == expected


def test_dep_length_batch_matches_single():
    rng = np.random.default_rng(6)
    n = 12
    heads = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        heads[i] = int(rng.integers(1, i + 1))
    orders = np.stack([rng.permutation(np.arange(1, n + 1)) for _ in range(40)])
    batch = kernels.dep_length_batch(heads, orders)
    singles = [kernels.dep_length(heads, row) for row in orders]
    assert batch.tolist() == singles


def test_trigram_scoring_backends_agree():
    model = toy_model()
    tables = model.tables()
    rng = np.random.default_rng(7)
    vocab_words = model.vocab.forms[3:]
    for _ in range(30):
        length = int(rng.integers(1, 12))
        sent = [vocab_words[int(rng.integers(len(vocab_words)))] for _ in range(length)]
        ids = model.token_ids(sent)
        via_dispatch = kernels.trigram_logprobs(ids, tables)
        via_python = kernels.python_backend["trigram_logprobs"](
            np.asarray(ids, dtype=np.int64), tables
        )
        np.testing.assert_allclose(via_dispatch, via_python, rtol=0, atol=1e-12)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")
def test_compiled_backend_agrees_with_python():
    model = toy_model()
    t = model.tables()
    rng = np.random.default_rng(8)
    vocab_words = model.vocab.forms[3:] + ["OOV-token"]
    for _ in range(50):
        length = int(rng.integers(1, 15))
        sent = [vocab_words[int(rng.integers(len(vocab_words)))] for _ in range(length)]
        ids = np.asarray(model.token_ids(sent), dtype=np.int64)
        fast = kernels.compiled_backend.trigram_logprobs(
            ids, t.V, t.uni_logp, t.bi_keys, t.bi_logp, t.bi_alpha,
            t.tri_keys, t.tri_logp, t.tri_ctx_keys, t.tri_ctx_alpha,
        )
        slow = kernels.python_backend["trigram_logprobs"](ids, t)
        np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-12)
