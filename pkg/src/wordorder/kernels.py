"""Hot numeric kernels with a compiled fast path.

Two operations dominate pipeline runtime: backoff trigram scoring over
tens of thousands of variant sentences, and dependency-length sums over
permuted orderings.  Both are implemented twice: in Cython
(``wordorder._speedups``, built by setup.py) and as NumPy fallbacks in
this module.  The compiled version is selected at import when present;
``WORDORDER_NO_SPEEDUPS=1`` forces the fallback.

The trigram tables are passed as flat sorted arrays of packed integer
keys so both implementations share one representation:

  key(a, b)    = a*V + b
  key(a, b, c) = (a*V + b)*V + c

with vocabulary ids below V.  ``benchmarks/bench_kernels.py`` compares
the two backends.
"""

from __future__ import annotations

import os
from typing import NamedTuple, Sequence

import numpy as np

MAX_VOCAB = 2_000_000  # (V**3) must stay inside int64


class ScorerTables(NamedTuple):
    """Packed-array form of a backoff trigram model (log2 domain)."""

    V: int
    uni_logp: np.ndarray        # float64[V], log2 P(w)
    bi_keys: np.ndarray         # int64, sorted packed (a, b)
    bi_logp: np.ndarray         # float64, log2 P(b | a)
    bi_alpha: np.ndarray        # float64[V], log2 backoff weight of unigram contexts
    tri_keys: np.ndarray        # int64, sorted packed (a, b, c)
    tri_logp: np.ndarray        # float64, log2 P(c | a, b)
    tri_ctx_keys: np.ndarray    # int64, sorted packed (a, b) contexts
    tri_ctx_alpha: np.ndarray   # float64, log2 backoff weight


def _sorted_lookup(keys, values, queries):
    """Value and found-mask per query against a sorted int64 key array."""
    queries = np.asarray(queries, dtype=np.int64)
    if len(keys) == 0:
        return np.zeros(len(queries)), np.zeros(len(queries), dtype=bool)
    idx = np.searchsorted(keys, queries)
    idx = np.minimum(idx, len(keys) - 1)
    found = keys[idx] == queries
    return values[idx], found


def _trigram_logprobs_py(ids: np.ndarray, t: ScorerTables) -> np.ndarray:
    a, b, c = ids[:-2], ids[1:-1], ids[2:]
    out = np.empty(len(c), dtype=np.float64)
    v3, hit3 = _sorted_lookup(t.tri_keys, t.tri_logp, (a * t.V + b) * t.V + c)
    out[hit3] = v3[hit3]
    miss = ~hit3
    if miss.any():
        bm, cm = b[miss], c[miss]
        alpha3, has_ctx = _sorted_lookup(t.tri_ctx_keys, t.tri_ctx_alpha, a[miss] * t.V + bm)
        acc = np.where(has_ctx, alpha3, 0.0)
        v2, hit2 = _sorted_lookup(t.bi_keys, t.bi_logp, bm * t.V + cm)
        out[miss] = np.where(hit2, acc + v2, acc + t.bi_alpha[bm] + t.uni_logp[cm])
    return out


def _dep_length_py(heads: np.ndarray, ordering: np.ndarray) -> int:
    n = len(heads)
    pos = np.empty(n + 1, dtype=np.int64)
    pos[ordering] = np.arange(n)
    dep = np.arange(1, n + 1)
    mask = heads != 0
    gaps = np.abs(pos[heads[mask]] - pos[dep[mask]]) - 1
    return int(np.maximum(gaps, 0).sum())


def _dep_length_batch_py(heads: np.ndarray, orderings: np.ndarray) -> np.ndarray:
    m, n = orderings.shape
    pos = np.empty((m, n + 1), dtype=np.int64)
    np.put_along_axis(pos, orderings, np.broadcast_to(np.arange(n), (m, n)), axis=1)
    dep = np.arange(1, n + 1)
    mask = heads != 0
    gaps = np.abs(pos[:, heads[mask]] - pos[:, dep[mask]]) - 1
    return np.maximum(gaps, 0).sum(axis=1)


_speedups = None
if not os.environ.get("WORDORDER_NO_SPEEDUPS"):
    try:
        from wordorder import _speedups  # type: ignore[attr-defined]
    except ImportError:
        _speedups = None

BACKEND = "compiled" if _speedups is not None else "python"


def trigram_logprobs(ids: Sequence[int] | np.ndarray, tables: ScorerTables) -> np.ndarray:
    """log2 probabilities for positions 2.. of a padded id sequence.

    ``ids`` must carry two begin-of-sentence ids in front; the result has
    ``len(ids) - 2`` entries (one per scored token, end marker included
    if the caller appended one).
    """
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if len(ids) < 3:
        return np.empty(0, dtype=np.float64)
    if _speedups is not None:
        return _speedups.trigram_logprobs(
            ids, tables.V, tables.uni_logp, tables.bi_keys, tables.bi_logp,
            tables.bi_alpha, tables.tri_keys, tables.tri_logp,
            tables.tri_ctx_keys, tables.tri_ctx_alpha,
        )
    return _trigram_logprobs_py(ids, tables)


def dep_length(heads: Sequence[int], ordering: Sequence[int]) -> int:
    """Summed intervening-word distance; heads[i] is the head of token i+1."""
    heads = np.ascontiguousarray(heads, dtype=np.int64)
    ordering = np.ascontiguousarray(ordering, dtype=np.int64)
    if _speedups is not None:
        return _speedups.dep_length(heads, ordering)
    return _dep_length_py(heads, ordering)


def dep_length_batch(heads: Sequence[int], orderings: np.ndarray) -> np.ndarray:
    heads = np.ascontiguousarray(heads, dtype=np.int64)
    orderings = np.ascontiguousarray(orderings, dtype=np.int64)
    if _speedups is not None:
        return _speedups.dep_length_batch(heads, orderings)
    return _dep_length_batch_py(heads, orderings)


# Exposed for the benchmark and for cross-backend equivalence tests.
python_backend = {
    "trigram_logprobs": _trigram_logprobs_py,
    "dep_length": _dep_length_py,
    "dep_length_batch": _dep_length_batch_py,
}
compiled_backend = _speedups
