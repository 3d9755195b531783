"""Grammatical word-order variant generation.

For every reference tree, all permutations of its preverbal constituents
are linearized (constituent-internal order preserved, every
non-permutable token kept at its original position), orders containing
an adjacent-constituent relation bigram never attested in the reference
corpus are discarded, duplicate surface strings are dropped, and the
survivor set is capped by uniform sampling.  The reference itself is
always emitted and never filtered.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from wordorder.treebank import Constituent, DependencyTree, preverbal_constituents

log = logging.getLogger(__name__)

# Beyond this many permutable constituents the full factorial is not
# enumerated; random permutations are sampled instead.
MAX_EXHAUSTIVE = 8
SAMPLED_POOL_FACTOR = 10


@dataclass(frozen=True)
class SentenceRecord:
    sentence_id: str
    family_id: str
    is_reference: bool
    ordering: tuple[int, ...]          # token indices in surface order
    text: str
    relation_sequence: tuple[str, ...]  # deprels of the preverbal constituents


@dataclass(frozen=True)
class AttestedBigramSet:
    bigrams: frozenset[tuple[str, str]]

    def __contains__(self, pair):
        return pair in self.bigrams

    def admits(self, relation_sequence: Sequence[str]) -> bool:
        return all(
            (a, b) in self.bigrams for a, b in zip(relation_sequence, relation_sequence[1:])
        )


def constituent_bigrams(relations: Sequence[str]) -> list[tuple[str, str]]:
    return list(zip(relations, relations[1:]))


def collect_attested_bigrams(trees: Iterable[DependencyTree]) -> AttestedBigramSet:
    """Adjacent preverbal-constituent relation pairs over the reference corpus."""
    pairs = set()
    for tree in trees:
        relations = [c.relation for c in preverbal_constituents(tree)]
        pairs.update(constituent_bigrams(relations))
    return AttestedBigramSet(frozenset(pairs))


def linearize(tree: DependencyTree, constituents: Sequence[Constituent],
              order: Sequence[int]) -> tuple[int, ...]:
    """Token ordering with constituents rearranged per ``order``.

    The surface slots occupied by the constituents' tokens are refilled
    by the reordered constituents' tokens; all other tokens (root,
    verbal complex, postverbal material) stay at their positions.
    """
    slots = sorted(i for c in constituents for i in c.token_indices)
    refill = [i for k in order for i in constituents[k].token_indices]
    ordering = list(range(1, len(tree.tokens) + 1))
    for slot, tok in zip(slots, refill):
        ordering[slot - 1] = tok
    return tuple(ordering)


def _iter_orders(n: int, rng: np.random.Generator, cap: int) -> Iterator[tuple[int, ...]]:
    """Candidate constituent orders: full factorial up to MAX_EXHAUSTIVE
    constituents, a sampled pool of random permutations above that.
    """
    if n <= MAX_EXHAUSTIVE:
        yield from itertools.permutations(range(n))
    else:
        target = SAMPLED_POOL_FACTOR * cap
        seen = set()
        # Oversample: duplicates are discarded, identity is handled by
        # the caller's reference dedup.
        for _ in range(target * 2):
            if len(seen) >= target:
                break
            perm = tuple(rng.permutation(n).tolist())
            if perm not in seen:
                seen.add(perm)
                yield perm


def enumerate_candidates(
    tree: DependencyTree,
    rng: np.random.Generator | None = None,
    cap: int = 100,
) -> Iterator[tuple[tuple[int, ...], tuple[str, ...]]]:
    """(ordering, relation sequence) for every candidate permutation,
    reference included, before any filtering.
    """
    constituents = preverbal_constituents(tree)
    if rng is None:
        rng = np.random.default_rng(0)
    for order in _iter_orders(len(constituents), rng, cap):
        ordering = linearize(tree, constituents, order)
        relations = tuple(constituents[k].relation for k in order)
        yield ordering, relations


def family_seed(seed: int, family_id: str) -> list[int]:
    """Stable per-family RNG seed material (independent of hash salting)."""
    digest = hashlib.blake2b(family_id.encode("utf-8"), digest_size=8).digest()
    return [int(seed), int.from_bytes(digest, "big")]


def generate_variants(
    tree: DependencyTree,
    attested: AttestedBigramSet,
    cap: int = 100,
    seed: int | Sequence[int] = 0,
) -> list[SentenceRecord]:
    """Reference record plus up to ``cap - 1`` filtered, deduplicated
    variants, deterministically sampled when the survivor pool is larger.
    """
    if cap < 2:
        raise ValueError(f"cap must be >= 2, got {cap}")
    rng = np.random.default_rng(seed)
    constituents = preverbal_constituents(tree)
    reference_ordering = tuple(range(1, len(tree.tokens) + 1))
    reference_text = tree.text()
    reference = SentenceRecord(
        tree.sentence_id, tree.sentence_id, True,
        reference_ordering, reference_text,
        tuple(c.relation for c in constituents),
    )

    survivors = []
    seen_texts = {reference_text}
    for ordering, relations in enumerate_candidates(tree, rng, cap):
        if not attested.admits(relations):
            continue
        text = tree.text(ordering)
        if text in seen_texts:
            continue
        seen_texts.add(text)
        survivors.append((ordering, relations, text))

    if len(survivors) > cap - 1:
        keep = rng.choice(len(survivors), size=cap - 1, replace=False)
        survivors = [survivors[i] for i in sorted(keep)]

    records = [reference]
    for k, (ordering, relations, text) in enumerate(survivors, start=1):
        records.append(
            SentenceRecord(
                f"{tree.sentence_id}~v{k:03d}", tree.sentence_id, False,
                ordering, text, relations,
            )
        )
    return records


def write_variants_tsv(out: IO[str], records: Iterable[SentenceRecord]) -> None:
    out.write("family_id\tsentence_id\tis_reference\tordering\ttext\n")
    for r in records:
        ordering = " ".join(str(i) for i in r.ordering)
        out.write(f"{r.family_id}\t{r.sentence_id}\t{int(r.is_reference)}\t{ordering}\t{r.text}\n")


def read_variants_tsv(stream: IO[str] | Iterable[str]) -> list[SentenceRecord]:
    records = []
    it = iter(stream)
    next(it)  # header
    for line in it:
        line = line.rstrip("\n")
        if not line:
            continue
        family_id, sentence_id, is_ref, ordering, text = line.split("\t")
        records.append(
            SentenceRecord(
                sentence_id, family_id, is_ref == "1",
                tuple(int(i) for i in ordering.split()), text, (),
            )
        )
    return records
