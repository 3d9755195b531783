"""Trigram language model with Good-Turing discounting and Katz backoff,
plus a unigram cache for lexical-repetition scoring.

Training collects counts over ``<s>``-padded, ``</s>``-terminated
sentences.  Counts r in 1..gt_max are discounted with the Good-Turing
adjusted count r* = (r+1) * N_{r+1} / N_r computed from the
counts-of-counts of each order; larger counts are kept raw.  The freed
probability mass of every context is redistributed over unseen
continuations through a backoff weight chosen so the conditional
distribution sums to one:

    P(w | h) = c*(h, w) / c(h)                 if c(h, w) > 0
             = alpha(h) * P(w | shorter h)     otherwise

Surprisal is reported in bits (base-2 logs); the base only rescales the
feature uniformly, so classifier decisions are unaffected by the choice.

The cache model keeps the last H context words and interpolates
P = mu * count(w)/H + (1 - mu) * P_trigram per scored word.  The
denominator is H even when fewer than H words of history exist (the
equation-literal convention; pass ``denominator="len"`` for the
alternative), so the interpolated conditional only sums to exactly one
under a full cache.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from wordorder import kernels

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

LOG2_10 = math.log2(10.0)
# Probability floor for vocabulary events never seen in training when no
# Good-Turing mass was freed (mirrors the conventional -99 log10 sentinel).
FLOOR_LOG2 = -332.0
# Backoff weight used when a context freed no mass at all: keeps unseen
# continuations strictly positive while perturbing the sum by < 1e-12.
EPS_ALPHA_LOG2 = -40.0


class TrainingError(ValueError):
    pass


def good_turing_adjusted_counts(counts_of_counts: Mapping[int, int], gt_max: int = 7) -> dict[int, float]:
    """Adjusted counts r* = (r+1) * N_{r+1} / N_r for r = 1..gt_max.

    This is the bare published formula; entries where N_r or N_{r+1} is
    zero are omitted (the model falls back to the raw count there).
    """
    out = {}
    for r in range(1, gt_max + 1):
        n_r = counts_of_counts.get(r, 0)
        n_r1 = counts_of_counts.get(r + 1, 0)
        if n_r > 0 and n_r1 > 0:
            out[r] = (r + 1) * n_r1 / n_r
    return out


def _discount_ratios(counts_of_counts: Mapping[int, int], gt_max: int, order: int) -> dict[int, float]:
    """Per-count discount ratios d_r = r*/r with degeneracy guards."""
    ratios = {}
    adjusted = good_turing_adjusted_counts(counts_of_counts, gt_max)
    for r in range(1, gt_max + 1):
        if counts_of_counts.get(r, 0) == 0:
            continue
        r_star = adjusted.get(r)
        if r_star is None:
            log.warning(
                "order %d: N_%d degenerate (N_r=%d, N_{r+1}=%d); keeping raw count",
                order, r, counts_of_counts.get(r, 0), counts_of_counts.get(r + 1, 0),
            )
            continue
        if r_star >= r:
            log.warning(
                "order %d: adjusted count %.4f >= raw %d; keeping raw count",
                order, r_star, r,
            )
            continue
        ratios[r] = r_star / r
    return ratios


@dataclass
class Vocab:
    forms: list[str]
    index: dict[str, int]

    @classmethod
    def build(cls, words: Iterable[str]) -> "Vocab":
        forms = [UNK, BOS, EOS]
        seen = set(forms)
        for w in sorted(set(words)):
            if w not in seen:
                forms.append(w)
                seen.add(w)
        return cls(forms, {w: i for i, w in enumerate(forms)})

    def __len__(self):
        return len(self.forms)

    def id(self, form: str) -> int:
        return self.index.get(form, self.index[UNK])

    @property
    def unk_id(self):
        return self.index[UNK]

    @property
    def bos_id(self):
        return self.index[BOS]

    @property
    def eos_id(self):
        return self.index[EOS]

    def event_ids(self) -> list[int]:
        """Ids over which conditionals are normalized (everything but <s>)."""
        bos = self.bos_id
        return [i for i in range(len(self.forms)) if i != bos]


@dataclass(frozen=True)
class SurprisalResult:
    per_word: tuple[tuple[str, float], ...]
    sentence_total: float


@dataclass
class CacheState:
    """FIFO of the most recent context words, with multiplicity counts."""

    history_len: int = 100
    history: deque = field(default_factory=deque)
    counts: Counter = field(default_factory=Counter)

    def push(self, token: str) -> None:
        self.history.append(token)
        self.counts[token] += 1
        while len(self.history) > self.history_len:
            old = self.history.popleft()
            self.counts[old] -= 1
            if self.counts[old] == 0:
                del self.counts[old]

    def prob(self, token: str, denominator: str = "H") -> float:
        if denominator == "H":
            return self.counts.get(token, 0) / self.history_len
        if denominator == "len":
            return self.counts.get(token, 0) / len(self.history) if self.history else 0.0
        raise ValueError(f"denominator must be 'H' or 'len', got {denominator!r}")


def adapt_cache(cache: CacheState, context_sentences: Sequence[Sequence[str]], k: int) -> CacheState:
    """Fresh cache holding the last ``k`` context sentences' tokens,
    truncated to the most recent ``history_len`` words.  ``k = 0`` gives
    an empty cache.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    fresh = CacheState(history_len=cache.history_len)
    for sent in context_sentences[len(context_sentences) - k:] if k else []:
        for tok in sent:
            fresh.push(tok)
    return fresh


class NgramModel:
    """Immutable-after-training Katz backoff trigram model (log2 domain)."""

    def __init__(self, vocab, uni_logp, bi_logp, tri_logp, bi_alpha, tri_alpha,
                 counts=None, context_totals=None, adjusted_counts=None,
                 gt_max=7, min_count=1):
        self.vocab = vocab
        self.uni_logp = uni_logp          # id -> log2 P(w)
        self.bi_logp = bi_logp            # (a, b) -> log2 P(b|a)
        self.tri_logp = tri_logp          # (a, b, c) -> log2 P(c|a,b)
        self.bi_alpha = bi_alpha          # (a,) -> log2 alpha
        self.tri_alpha = tri_alpha        # (a, b) -> log2 alpha
        self.counts = counts              # order -> ngram tuple -> raw count
        self.context_totals = context_totals
        self.adjusted_counts = adjusted_counts  # order -> r -> r*
        self.gt_max = gt_max
        self.min_count = min_count
        self._tables = None

    # -- scoring ------------------------------------------------------

    def tables(self) -> kernels.ScorerTables:
        if self._tables is None:
            V = len(self.vocab)
            if V > kernels.MAX_VOCAB:
                raise ValueError(f"vocabulary too large for packed keys ({V})")
            uni = np.full(V, FLOOR_LOG2, dtype=np.float64)
            for i, lp in self.uni_logp.items():
                uni[i] = lp
            bi_alpha = np.zeros(V, dtype=np.float64)
            for (a,), lp in self.bi_alpha.items():
                bi_alpha[a] = lp

            def packed(table, arity):
                keys = np.empty(len(table), dtype=np.int64)
                vals = np.empty(len(table), dtype=np.float64)
                for n, (gram, lp) in enumerate(table.items()):
                    k = 0
                    for x in gram:
                        k = k * V + x
                    keys[n] = k
                    vals[n] = lp
                order = np.argsort(keys)
                return keys[order], vals[order]

            bi_keys, bi_vals = packed(self.bi_logp, 2)
            tri_keys, tri_vals = packed(self.tri_logp, 3)
            ctx_keys, ctx_vals = packed(self.tri_alpha, 2)
            self._tables = kernels.ScorerTables(
                V, uni, bi_keys, bi_vals, bi_alpha, tri_keys, tri_vals, ctx_keys, ctx_vals
            )
        return self._tables

    def token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        """Padded id sequence [<s>, <s>, w_1.., </s>] with OOV -> <unk>."""
        v = self.vocab
        ids = [v.bos_id, v.bos_id]
        ids.extend(v.id(t) for t in tokens)
        ids.append(v.eos_id)
        return np.asarray(ids, dtype=np.int64)

    def sequence_logprobs(self, tokens: Sequence[str]) -> np.ndarray:
        """log2 P per scored position (each token, then </s>)."""
        return kernels.trigram_logprobs(self.token_ids(tokens), self.tables())

    def conditional_logprob(self, context: tuple[str, ...], word: str) -> float:
        """Slow reference path through the dict tables (no packed arrays)."""
        v = self.vocab
        ids = tuple(v.id(w) for w in context[-2:])
        c = v.id(word)
        if len(ids) == 2:
            tri = ids + (c,)
            if tri in self.tri_logp:
                return self.tri_logp[tri]
            acc = self.tri_alpha.get(ids, 0.0)
            return acc + self._bigram_logprob(ids[1], c)
        if len(ids) == 1:
            return self._bigram_logprob(ids[0], c)
        return self.uni_logp.get(c, FLOOR_LOG2)

    def _bigram_logprob(self, b, c):
        if (b, c) in self.bi_logp:
            return self.bi_logp[(b, c)]
        return self.bi_alpha.get((b,), 0.0) + self.uni_logp.get(c, FLOOR_LOG2)

    def conditional_prob(self, context: tuple[str, ...], word: str) -> float:
        return 2.0 ** self.conditional_logprob(context, word)


def _read_sentences(corpus: IO[str] | Iterable[str]) -> list[list[str]]:
    sentences = []
    for line in corpus:
        toks = line.split()
        if toks:
            sentences.append(toks)
    return sentences


def train(corpus: IO[str] | Iterable[str], gt_max: int = 7, min_count: int = 1) -> NgramModel:
    """Train a Katz backoff trigram model.

    ``corpus`` yields one whitespace-tokenized sentence per line.  Words
    with unigram count below ``min_count`` are mapped to ``<unk>``
    before the final count pass.
    """
    sentences = _read_sentences(corpus)
    if not sentences:
        raise TrainingError("empty training corpus")

    raw_uni = Counter(tok for sent in sentences for tok in sent)
    if min_count > 1:
        kept = {w for w, c in raw_uni.items() if c >= min_count}
        sentences = [[t if t in kept else UNK for t in sent] for sent in sentences]
        vocab = Vocab.build(kept | {UNK})
    else:
        vocab = Vocab.build(raw_uni)

    uni: Counter = Counter()
    bi: Counter = Counter()
    tri: Counter = Counter()
    bos, eos = vocab.bos_id, vocab.eos_id
    for sent in sentences:
        ids = [vocab.id(t) for t in sent]
        events = ids + [eos]
        uni.update(events)
        padded1 = [bos] + events
        bi.update(zip(padded1, events))
        padded2 = [bos, bos] + events
        tri.update(zip(padded2, padded2[1:], events))

    counts = {1: dict(uni), 2: {(a, b): c for (a, b), c in bi.items()},
              3: {(a, b, c): n for (a, b, c), n in tri.items()}}
    ctx_bi: Counter = Counter()
    for (a, _), c in bi.items():
        ctx_bi[(a,)] += c
    ctx_tri: Counter = Counter()
    for (a, b, _), c in tri.items():
        ctx_tri[(a, b)] += c

    coc = {order: Counter(tab.values()) for order, tab in counts.items()}
    ratios = {order: _discount_ratios(coc[order], gt_max, order) for order in (1, 2, 3)}
    adjusted = {order: good_turing_adjusted_counts(coc[order], gt_max) for order in (1, 2, 3)}

    def disc(order, r):
        return ratios[order].get(r, 1.0) * r

    # Unigram distribution over events (everything except <s>).
    total = sum(uni.values())
    uni_logp = {}
    seen_mass = 0.0
    for w, c in uni.items():
        p = disc(1, c) / total
        uni_logp[w] = math.log2(p)
        seen_mass += p
    beta = 1.0 - seen_mass
    unseen = [i for i in vocab.event_ids() if i not in uni]
    if unseen:
        if beta > 0:
            share = math.log2(beta / len(unseen))
        else:
            share = FLOOR_LOG2
        for i in unseen:
            uni_logp[i] = share
    elif beta > 1e-12:
        # Every event was observed; fold the freed mass back in.
        log.warning("unigram leftover mass %.3g with no unseen events; renormalizing", beta)
        scale = math.log2(1.0 / seen_mass)
        uni_logp = {w: lp + scale for w, lp in uni_logp.items()}

    def build_order(order, table, ctx_totals, lower_logprob):
        """Seen conditionals plus per-context backoff weights."""
        seen_p: dict = {}
        mass: dict = {}
        lower_mass: dict = {}
        for gram, c in table.items():
            ctx = gram[:-1]
            p = disc(order, c) / ctx_totals[ctx]
            seen_p[gram] = p
            mass[ctx] = mass.get(ctx, 0.0) + p
            lower_mass[ctx] = lower_mass.get(ctx, 0.0) + 2.0 ** lower_logprob(gram[1:])
        logp = {}
        alpha = {}
        rescale = {}
        for ctx in mass:
            b = 1.0 - mass[ctx]
            denom = 1.0 - lower_mass[ctx]
            if b <= 0.0:
                alpha[ctx] = EPS_ALPHA_LOG2
            elif denom <= 1e-12:
                # Seen continuations exhaust the backoff distribution.
                rescale[ctx] = 1.0 / mass[ctx]
                alpha[ctx] = EPS_ALPHA_LOG2
            else:
                alpha[ctx] = math.log2(b / denom)
        for gram, p in seen_p.items():
            logp[gram] = math.log2(p * rescale.get(gram[:-1], 1.0))
        return logp, alpha

    bi_logp, bi_alpha = build_order(
        2, counts[2], ctx_bi, lambda rest: uni_logp.get(rest[0], FLOOR_LOG2)
    )

    def bigram_lp(rest):
        b, c = rest
        if (b, c) in bi_logp:
            return bi_logp[(b, c)]
        return bi_alpha.get((b,), 0.0) + uni_logp.get(c, FLOOR_LOG2)

    tri_logp, tri_alpha = build_order(3, counts[3], ctx_tri, bigram_lp)

    return NgramModel(
        vocab, uni_logp, bi_logp, tri_logp, bi_alpha, tri_alpha,
        counts=counts,
        context_totals={2: dict(ctx_bi), 3: dict(ctx_tri)},
        adjusted_counts=adjusted,
        gt_max=gt_max, min_count=min_count,
    )


def surprisal(model: NgramModel, sentence: Sequence[str]) -> SurprisalResult:
    """Per-word trigram surprisal in bits; the total includes </s>."""
    lps = model.sequence_logprobs(sentence)
    labels = list(sentence) + [EOS]
    per_word = tuple((tok, float(0.0 - lp)) for tok, lp in zip(labels, lps))
    return SurprisalResult(per_word, float(0.0 - lps.sum()))


def cache_surprisal(
    model: NgramModel,
    cache: CacheState,
    sentence: Sequence[str],
    mu: float = 0.05,
    denominator: str = "H",
) -> SurprisalResult:
    """Cache-interpolated surprisal: P = mu*P_cache + (1-mu)*P_trigram.

    The cache holds preceding-context words only and is not updated by
    the scored sentence.  Cache counts are looked up by raw surface
    form, so a repeated out-of-vocabulary word still earns cache mass.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must be in [0, 1], got {mu}")
    tri_p = 2.0 ** model.sequence_logprobs(sentence)
    labels = list(sentence) + [EOS]
    cache_p = np.array([cache.prob(tok, denominator) for tok in labels])
    p = mu * cache_p + (1.0 - mu) * tri_p
    surps = 0.0 - np.log2(p)
    per_word = tuple((tok, float(s)) for tok, s in zip(labels, surps))
    return SurprisalResult(per_word, float(surps.sum()))


# -- serialization ----------------------------------------------------

def _fmt(logp2: float) -> str:
    lp10 = logp2 / LOG2_10
    if lp10 <= -99.0:
        lp10 = -99.0
    return f"{lp10:.7f}"


def to_arpa(model: NgramModel, out: IO[str]) -> None:
    """ARPA-style text dump (log10 probabilities and backoff weights).

    Deterministic: entries are sorted lexicographically by surface form,
    floats formatted at fixed width.
    """
    v = model.vocab
    uni_rows = []
    for i in sorted(range(len(v)), key=lambda i: v.forms[i]):
        if i == v.bos_id:
            lp = "-99.0000000"
        elif i in model.uni_logp:
            lp = _fmt(model.uni_logp[i])
        else:
            continue
        alpha = model.bi_alpha.get((i,))
        row = f"{lp}\t{v.forms[i]}"
        if alpha is not None:
            row += f"\t{_fmt(alpha)}"
        uni_rows.append(row)
    bi_rows = []
    for (a, b) in sorted(model.bi_logp, key=lambda g: (v.forms[g[0]], v.forms[g[1]])):
        row = f"{_fmt(model.bi_logp[(a, b)])}\t{v.forms[a]} {v.forms[b]}"
        alpha = model.tri_alpha.get((a, b))
        if alpha is not None:
            row += f"\t{_fmt(alpha)}"
        bi_rows.append(row)
    tri_rows = [
        f"{_fmt(model.tri_logp[g])}\t{v.forms[g[0]]} {v.forms[g[1]]} {v.forms[g[2]]}"
        for g in sorted(model.tri_logp, key=lambda g: (v.forms[g[0]], v.forms[g[1]], v.forms[g[2]]))
    ]
    out.write("\\data\\\n")
    out.write(f"ngram 1={len(uni_rows)}\n")
    out.write(f"ngram 2={len(bi_rows)}\n")
    out.write(f"ngram 3={len(tri_rows)}\n")
    for n, rows in ((1, uni_rows), (2, bi_rows), (3, tri_rows)):
        out.write(f"\n\\{n}-grams:\n")
        for row in rows:
            out.write(row + "\n")
    out.write("\n\\end\\\n")


def from_arpa(stream: IO[str] | Iterable[str]) -> NgramModel:
    """Rebuild a scoring-capable model from an ARPA dump.

    Raw counts do not survive the round trip; only probabilities and
    backoff weights are recovered.
    """
    sections: dict[int, list[str]] = {}
    order = None
    for raw in stream:
        line = raw.strip()
        if not line or line == "\\data\\" or line.startswith("ngram "):
            continue
        if line == "\\end\\":
            break
        if line.endswith("-grams:") and line.startswith("\\"):
            order = int(line[1])
            sections[order] = []
            continue
        if order is not None:
            sections[order].append(line)

    words = set()
    for line in sections.get(1, []):
        words.add(line.split("\t")[1])
    vocab = Vocab.build(words - {BOS, EOS, UNK})

    uni_logp, bi_logp, tri_logp = {}, {}, {}
    bi_alpha, tri_alpha = {}, {}
    for order_n, table, alpha_tab in ((1, uni_logp, bi_alpha), (2, bi_logp, tri_alpha), (3, tri_logp, None)):
        for line in sections.get(order_n, []):
            parts = line.split("\t")
            lp = float(parts[0]) * LOG2_10
            gram = tuple(vocab.id(w) for w in parts[1].split(" "))
            key = gram[0] if order_n == 1 else gram
            if not (order_n == 1 and parts[1] == BOS):
                table[key] = lp
            if alpha_tab is not None and len(parts) > 2:
                alpha_tab[gram] = float(parts[2]) * LOG2_10
    return NgramModel(vocab, uni_logp, bi_logp, tri_logp, bi_alpha, tri_alpha)


def write_surprisal_tsv(out: IO[str], rows: Iterable[tuple[str, SurprisalResult]]) -> None:
    """TSV dump: sentence_id, token_index, token, surprisal_bits."""
    out.write("sentence_id\ttoken_index\ttoken\tsurprisal_bits\n")
    for sentence_id, result in rows:
        for idx, (tok, bits) in enumerate(result.per_word, start=1):
            out.write(f"{sentence_id}\t{idx}\t{tok}\t{bits:.6f}\n")
