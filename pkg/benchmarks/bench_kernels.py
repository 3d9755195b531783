"""Benchmark: compiled kernels vs. the NumPy fallback.

Times backoff trigram scoring and batched dependency-length sums on a
synthetic workload shaped like a real pipeline run (thousands of short
sentences over a trained model).

    python benchmarks/bench_kernels.py [n_sentences]
"""

import io
import sys
import time

import numpy as np

from wordorder import kernels, ngramlm, toydata


def build_workload(n_sentences):
    corpus = toydata.generate(n_families=max(200, n_sentences // 20), seed=0)
    model = ngramlm.train(io.StringIO(corpus.lm_corpus_text))
    rng = np.random.default_rng(1)
    trees = corpus.trees
    sentences = []
    for _ in range(n_sentences):
        tree = trees[int(rng.integers(len(trees)))]
        order = rng.permutation(np.arange(1, len(tree.tokens) + 1))
        sentences.append(tree.forms(order.tolist()))
    id_seqs = [model.token_ids(s) for s in sentences]
    heads_by_len = {}
    orderings = []
    for tree in trees:
        n = len(tree.tokens)
        heads = np.array([t.head for t in tree.tokens], dtype=np.int64)
        rows = np.stack([rng.permutation(np.arange(1, n + 1)) for _ in range(100)])
        heads_by_len.setdefault(n, []).append((heads, rows))
        orderings.append((heads, rows))
    return model.tables(), id_seqs, orderings


def time_it(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n_sentences = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
    tables, id_seqs, orderings = build_workload(n_sentences)
    n_tokens = sum(len(ids) - 2 for ids in id_seqs)

    def score_python():
        for ids in id_seqs:
            kernels.python_backend["trigram_logprobs"](np.asarray(ids, dtype=np.int64), tables)

    def deps_python():
        for heads, rows in orderings:
            kernels.python_backend["dep_length_batch"](heads, rows)

    rows = []
    t = time_it(score_python)
    rows.append(("trigram scoring", "python", t, n_tokens / t))
    t = time_it(deps_python)
    n_orders = sum(len(r) for _, r in orderings)
    rows.append(("dep-length batch", "python", t, n_orders / t))

    if kernels.compiled_backend is not None:
        c = kernels.compiled_backend

        def score_compiled():
            for ids in id_seqs:
                c.trigram_logprobs(
                    np.asarray(ids, dtype=np.int64), tables.V, tables.uni_logp,
                    tables.bi_keys, tables.bi_logp, tables.bi_alpha,
                    tables.tri_keys, tables.tri_logp,
                    tables.tri_ctx_keys, tables.tri_ctx_alpha,
                )

        def deps_compiled():
            for heads, rows_ in orderings:
                c.dep_length_batch(heads, rows_)

        t = time_it(score_compiled)
        rows.append(("trigram scoring", "compiled", t, n_tokens / t))
        t = time_it(deps_compiled)
        rows.append(("dep-length batch", "compiled", t, n_orders / t))
    else:
        print("compiled extension not built; python backend only\n")

    print(f"workload: {len(id_seqs)} sentences, {n_tokens} scored tokens, "
          f"{n_orders} orderings\n")
    print(f"{'kernel':<18}{'backend':<10}{'seconds':>10}{'items/s':>14}")
    for name, backend, secs, rate in rows:
        print(f"{name:<18}{backend:<10}{secs:>10.3f}{rate:>14,.0f}")
    by_kernel = {}
    for name, backend, secs, _ in rows:
        by_kernel.setdefault(name, {})[backend] = secs
    print()
    for name, t_by in by_kernel.items():
        if "compiled" in t_by:
            print(f"{name}: compiled is {t_by['python'] / t_by['compiled']:.1f}x "
                  f"the python backend")


if __name__ == "__main__":
    main()
