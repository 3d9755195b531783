"""Per-sentence feature vectors: dependency length, trigram surprisal,
lexical-repetition (cache) surprisal, information-status score, and
externally computed score columns joined by sentence id.

Variants inherit their reference's discourse position: the preceding
sentences used for the cache and for givenness are always the reference
sentences earlier in the same document.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from wordorder import kernels, ngramlm
from wordorder.treebank import DependencyTree, preverbal_constituents
from wordorder.variantgen import SentenceRecord

log = logging.getLogger(__name__)

# Open-class tags whose exact surface repetition marks a phrase as Given,
# and pronoun tags that mark givenness intrinsically.  The corpus tagset
# decides these; override per call for other tagsets.
CONTENT_POS = frozenset({"NN", "NNC", "NNP", "NNPC", "JJ", "VM"})
PRONOUN_POS = frozenset({"PRP", "PRPC", "WQ"})

SUBJECT_RELATION = "k1"
OBJECT_RELATIONS = ("k2", "k4")


class MissingScoreError(KeyError):
    def __init__(self, column, sentence_id):
        super().__init__(f"external column {column!r} has no score for sentence {sentence_id!r}")
        self.column = column
        self.sentence_id = sentence_id


@dataclass(frozen=True)
class FeatureVector:
    sentence_id: str
    family_id: str
    is_reference: bool
    values: dict[str, float]


@dataclass(frozen=True)
class ExternalScoreColumn:
    name: str
    scores: Mapping[str, float]


@dataclass
class FamilyContext:
    """One reference tree, its sentence records, and its discourse context
    (preceding reference trees of the same document, oldest first).
    """

    tree: DependencyTree
    records: list[SentenceRecord]
    preceding: list[DependencyTree] = field(default_factory=list)


def read_score_column(name: str, stream: IO[str] | Iterable[str]) -> ExternalScoreColumn:
    """TSV with header ``sentence_id<TAB>score``."""
    it = iter(stream)
    header = next(it).rstrip("\n")
    if header.split("\t")[:2] != ["sentence_id", "score"]:
        raise ValueError(f"column {name!r}: bad header {header!r}")
    scores = {}
    for line in it:
        line = line.rstrip("\n")
        if not line:
            continue
        sid, value = line.split("\t")
        scores[sid] = float(value)
    return ExternalScoreColumn(name, scores)


def write_score_column(out: IO[str], column: ExternalScoreColumn) -> None:
    out.write("sentence_id\tscore\n")
    for sid in sorted(column.scores):
        out.write(f"{sid}\t{column.scores[sid]:.6f}\n")


def _content_forms(tree: DependencyTree, content_pos) -> set[str]:
    return {t.form for t in tree.tokens if t.pos in content_pos}


def _constituent_status(tree, constituent, preceding_forms, content_pos, pronoun_pos) -> str:
    if tree.token(constituent.head_index).pos in pronoun_pos:
        return "Given"
    for i in constituent.token_indices:
        tok = tree.token(i)
        if tok.pos in content_pos and tok.form in preceding_forms:
            return "Given"
    return "New"


@dataclass(frozen=True)
class IsAnnotation:
    """Givenness of the subject (k1) and object (first k2/k4) slots and
    which of the two surfaces first under the evaluated ordering."""

    subject_status: str  # Given | New | Absent
    object_status: str
    order: str           # subject_first | object_first | none

    @property
    def score(self) -> int:
        statuses = {self.subject_status, self.object_status}
        if "Absent" in statuses or len(statuses) == 1:
            return 0
        first = self.subject_status if self.order == "subject_first" else self.object_status
        return 1 if first == "Given" else -1


def annotate_information_status(
    tree: DependencyTree,
    ordering: Sequence[int],
    preceding: DependencyTree | None,
    content_pos: frozenset[str] = CONTENT_POS,
    pronoun_pos: frozenset[str] = PRONOUN_POS,
) -> IsAnnotation:
    """Tag the argument slots Given or New.

    A slot is Given when its head is a pronoun or any of its content
    words repeats the exact surface form of a content word in the
    immediately preceding sentence; New otherwise; Absent when the tree
    has no such constituent.
    """
    position = {tok: pos for pos, tok in enumerate(ordering)}
    constituents = preverbal_constituents(tree)

    def first_position(con):
        return min(position[i] for i in con.token_indices)

    subjects = sorted(
        (c for c in constituents if c.relation == SUBJECT_RELATION), key=first_position
    )
    objects = sorted(
        (c for c in constituents if c.relation in OBJECT_RELATIONS), key=first_position
    )
    preceding_forms = _content_forms(preceding, content_pos) if preceding is not None else set()

    def status_of(slot):
        if not slot:
            return "Absent"
        return _constituent_status(tree, slot[0], preceding_forms, content_pos, pronoun_pos)

    if not subjects or not objects:
        return IsAnnotation(status_of(subjects), status_of(objects), "none")
    return IsAnnotation(
        status_of(subjects),
        status_of(objects),
        "subject_first"
        if first_position(subjects[0]) < first_position(objects[0])
        else "object_first",
    )


def is_score(
    tree: DependencyTree,
    ordering: Sequence[int],
    preceding: DependencyTree | None,
    content_pos: frozenset[str] = CONTENT_POS,
    pronoun_pos: frozenset[str] = PRONOUN_POS,
) -> int:
    """Information-status score of the subject/object pair under ``ordering``.

    +1 when the Given argument precedes the New one, -1 for the reverse,
    0 when statuses match or either argument is missing.
    """
    return annotate_information_status(tree, ordering, preceding, content_pos, pronoun_pos).score


def featurize(
    families: Sequence[FamilyContext],
    model: ngramlm.NgramModel,
    external: Sequence[ExternalScoreColumn] = (),
    adapt_k: int = 1,
    mu: float = 0.05,
    history_len: int = 100,
    content_pos: frozenset[str] = CONTENT_POS,
    pronoun_pos: frozenset[str] = PRONOUN_POS,
) -> list[FeatureVector]:
    """Feature vectors for every record of every family.

    All vectors in one run carry the identical key set:
    dep_length, trigram_surp, lex_rept_surp, is_score, plus one key per
    external column.  A missing external score is a hard error.
    """
    vectors = []
    for family in families:
        tree = family.tree
        heads = [t.head for t in tree.tokens]
        preceding_tree = family.preceding[-1] if family.preceding else None
        cache = ngramlm.adapt_cache(
            ngramlm.CacheState(history_len=history_len),
            [[t.form for t in p.tokens] for p in family.preceding],
            adapt_k,
        )
        orderings = np.array([r.ordering for r in family.records], dtype=np.int64)
        dep_lengths = kernels.dep_length_batch(heads, orderings)
        for record, dlen in zip(family.records, dep_lengths):
            tokens = tree.forms(record.ordering)
            values = {
                "dep_length": float(dlen),
                "trigram_surp": ngramlm.surprisal(model, tokens).sentence_total,
                "lex_rept_surp": ngramlm.cache_surprisal(model, cache, tokens, mu).sentence_total,
                "is_score": float(
                    is_score(tree, record.ordering, preceding_tree, content_pos, pronoun_pos)
                ),
            }
            for column in external:
                if record.sentence_id not in column.scores:
                    raise MissingScoreError(column.name, record.sentence_id)
                values[column.name] = float(column.scores[record.sentence_id])
            for name, value in values.items():
                if not np.isfinite(value):
                    raise ValueError(
                        f"non-finite {name}={value} for sentence {record.sentence_id!r}"
                    )
            vectors.append(
                FeatureVector(record.sentence_id, record.family_id, record.is_reference, values)
            )
    return vectors


def feature_names(vectors: Sequence[FeatureVector]) -> list[str]:
    names = list(vectors[0].values)
    for v in vectors:
        if list(v.values) != names:
            raise ValueError(f"ragged feature keys at sentence {v.sentence_id!r}")
    return names


def write_feature_csv(out: IO[str], vectors: Sequence[FeatureVector]) -> None:
    names = feature_names(vectors)
    out.write(",".join(["sentence_id", "family_id", "is_reference"] + names) + "\n")
    for v in vectors:
        row = [v.sentence_id, v.family_id, str(int(v.is_reference))]
        row.extend(repr(v.values[n]) for n in names)
        out.write(",".join(row) + "\n")


def read_feature_csv(stream: IO[str] | Iterable[str]) -> list[FeatureVector]:
    it = iter(stream)
    header = next(it).rstrip("\n").split(",")
    names = header[3:]
    vectors = []
    for line in it:
        line = line.rstrip("\n")
        if not line:
            continue
        cols = line.split(",")
        values = {n: float(x) for n, x in zip(names, cols[3:])}
        vectors.append(FeatureVector(cols[0], cols[1], cols[2] == "1", values))
    return vectors
