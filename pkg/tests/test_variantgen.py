import io
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wordorder import variantgen
from wordorder.treebank import preverbal_constituents
from wordorder.variantgen import (
    AttestedBigramSet,
    collect_attested_bigrams,
    enumerate_candidates,
    generate_variants,
    read_variants_tsv,
    write_variants_tsv,
)

from conftest import make_tree


def all_pairs(relations=("k1", "k2", "k3", "k4", "k7t", "pof")):
    return AttestedBigramSet(frozenset((a, b) for a in relations for b in relations))


def wide_tree(n_constituents, prefix="c"):
    """One-token constituents followed by root verb and trailing symbol."""
    rows = []
    relations = ["k1", "k2", "k4", "k7t", "k3", "pof", "rt", "adv", "x9"]
    verb = n_constituents + 1
    for j in range(n_constituents):
        rows.append((f"{prefix}{j}", "NN", verb, relations[j]))
    rows.append(("v", "VM", 0, "root"))
    rows.append(("danda", "SYM", verb, "rsym"))
    return make_tree(rows)


class TestAttestedBigrams:
    def test_figure_tree_pairs(self, figure_tree):
        attested = collect_attested_bigrams([figure_tree])
        assert attested.bigrams == {("k4", "k1"), ("k1", "k7t"), ("k7t", "k3"), ("k3", "pof")}

    def test_single_constituent_contributes_nothing(self):
        tree = make_tree([("a", "NN", 2, "k1"), ("v", "VM", 0, "root")])
        assert collect_attested_bigrams([tree]).bigrams == frozenset()

    def test_idempotent_union(self, figure_tree):
        once = collect_attested_bigrams([figure_tree])
        twice = collect_attested_bigrams([figure_tree, figure_tree])
        assert once == twice


class TestEnumeration:
    def test_five_constituents_at_most_120_candidates(self, figure_tree):
        candidates = list(enumerate_candidates(figure_tree))
        assert len(candidates) == 120
        assert len(set(c[0] for c in candidates)) == 120

    def test_linearize_keeps_internal_order_and_fixed_tokens(self, figure_tree):
        cons = preverbal_constituents(figure_tree)
        ordering = variantgen.linearize(figure_tree, cons, [1, 0, 2, 3, 4])
        # "yah" (4) now first, then "amar ujala ko" (1 2 3); verb stays last
        assert ordering == (4, 1, 2, 3, 5, 6, 7, 8, 9, 10)

    def test_postverbal_tokens_untouched(self):
        tree = wide_tree(3)
        records = generate_variants(tree, all_pairs(("k1", "k2", "k4", "rt", "adv")), seed=0)
        verb_and_after = tree.text().split()[-2:]
        for r in records:
            assert r.text.split()[-2:] == verb_and_after

    def test_fixed_token_between_constituents_keeps_its_slot(self):
        # negation particle (verbal complex) sits between two permutable
        # constituents; permutations flow around it
        tree = make_tree(
            [
                ("a", "NN", 4, "k1"),
                ("nahi", "RP", 4, "lwg_neg"),
                ("b", "NN", 4, "k2"),
                ("v", "VM", 0, "root"),
            ]
        )
        records = generate_variants(tree, all_pairs(("k1", "k2")), seed=0)
        texts = {r.text for r in records}
        assert texts == {"a nahi b v", "b nahi a v"}
        for r in records:
            assert r.text.split()[1] == "nahi"


class TestGeneration:
    def test_reference_always_first_and_flagged(self, figure_tree):
        records = generate_variants(figure_tree, all_pairs(), seed=1)
        assert records[0].is_reference
        assert records[0].sentence_id == figure_tree.sentence_id
        assert sum(r.is_reference for r in records) == 1

    def test_empty_attested_leaves_only_reference(self, figure_tree):
        records = generate_variants(figure_tree, AttestedBigramSet(frozenset()), seed=1)
        assert len(records) == 1
        assert records[0].is_reference

    def test_cap_is_exact_when_survivors_exceed_it(self, figure_tree):
        records = generate_variants(figure_tree, all_pairs(), cap=100, seed=3)
        # 120 permutations, one is the reference text: 119 survivors > 99
        assert len(records) == 100

    def test_small_cap(self, figure_tree):
        records = generate_variants(figure_tree, all_pairs(), cap=5, seed=3)
        assert len(records) == 5
        assert records[0].is_reference

    def test_cap_below_two_rejected(self, figure_tree):
        with pytest.raises(ValueError, match="cap"):
            generate_variants(figure_tree, all_pairs(), cap=1, seed=0)

    def test_filter_soundness(self, figure_tree):
        attested = collect_attested_bigrams([figure_tree])
        records = generate_variants(figure_tree, attested, seed=2)
        for r in records[1:]:
            assert attested.admits(r.relation_sequence), r.relation_sequence

    def test_token_multiset_preserved(self, figure_tree):
        records = generate_variants(figure_tree, all_pairs(), seed=4)
        ref_counts = Counter(records[0].text.split())
        for r in records:
            assert Counter(r.text.split()) == ref_counts
            assert sorted(r.ordering) == list(range(1, 11))

    def test_determinism(self, figure_tree):
        a = generate_variants(figure_tree, all_pairs(), cap=20, seed=42)
        b = generate_variants(figure_tree, all_pairs(), cap=20, seed=42)
        c = generate_variants(figure_tree, all_pairs(), cap=20, seed=43)
        assert a == b
        assert a != c

    def test_duplicate_surfaces_deduplicated(self):
        # two one-token constituents with identical forms: swapping them
        # reproduces the reference text, so no variant survives
        tree = make_tree(
            [("same", "NN", 3, "k1"), ("same", "NN", 3, "k2"), ("v", "VM", 0, "root")]
        )
        records = generate_variants(tree, all_pairs(("k1", "k2")), seed=0)
        assert len(records) == 1

    def test_sampled_path_for_many_constituents(self):
        tree = wide_tree(9)
        records = generate_variants(tree, all_pairs(tuple("abcdefkrx") + ("k1", "k2", "k4", "k7t", "k3", "pof", "rt", "adv", "x9")), cap=50, seed=9)
        assert len(records) == 50
        assert records[0].is_reference
        texts = [r.text for r in records]
        assert len(set(texts)) == len(texts)

    def test_reference_passes_own_filter(self, figure_tree):
        attested = collect_attested_bigrams([figure_tree])
        assert attested.admits(
            tuple(c.relation for c in preverbal_constituents(figure_tree))
        )


@given(seed=st.integers(min_value=0, max_value=2**31), cap=st.integers(min_value=2, max_value=130))
@settings(max_examples=25, deadline=None)
def test_generation_invariants_hold_for_any_seed_and_cap(seed, cap):
    tree = wide_tree(4)
    attested = AttestedBigramSet(
        frozenset(
            [("k1", "k2"), ("k2", "k4"), ("k4", "k7t"), ("k2", "k1"), ("k4", "k1"),
             ("k7t", "k1"), ("k1", "k4"), ("k7t", "k4"), ("k2", "k7t"), ("k7t", "k2"),
             ("k4", "k2"), ("k1", "k7t")]
        )
    )
    records = generate_variants(tree, attested, cap=cap, seed=seed)
    assert records[0].is_reference
    assert len(records) <= cap
    for r in records[1:]:
        assert attested.admits(r.relation_sequence)
        assert sorted(r.ordering) == list(range(1, len(tree.tokens) + 1))


def test_tsv_round_trip(figure_tree):
    records = generate_variants(figure_tree, all_pairs(), cap=10, seed=5)
    buf = io.StringIO()
    write_variants_tsv(buf, records)
    back = read_variants_tsv(io.StringIO(buf.getvalue()))
    assert [(r.sentence_id, r.family_id, r.is_reference, r.ordering, r.text) for r in back] == [
        (r.sentence_id, r.family_id, r.is_reference, r.ordering, r.text) for r in records
    ]
