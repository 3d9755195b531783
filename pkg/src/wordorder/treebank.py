"""Dependency treebank parsing, validation, and constituent extraction.

Input is a CoNLL-style 8-column TSV (ID, FORM, LEMMA, CPOS, POS, FEATS,
HEAD, DEPREL), sentences separated by blank lines, with ``#sent_id = X``
and ``#doc_id = Y`` comment lines carrying metadata.  Trees are validated
on parse (single root, acyclic, contiguous 1..n indices).

The module also knows how to pull out the preverbal constituents of a
tree (the direct dependents of the root whose whole yield precedes the
root token) and to measure dependency length under an arbitrary
linearization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

from wordorder import kernels

log = logging.getLogger(__name__)

# Direct root dependents carrying these relations are part of the verbal
# complex (auxiliaries, postposition groups, trailing symbols) and are
# never permuted.  Overridable per call.  Conjunct-verb parts ("pof")
# stay permutable: they participate in constituent ordering like any
# other preverbal dependent.
VERBAL_COMPLEX_RELATIONS = frozenset({"rsym"})
VERBAL_COMPLEX_PREFIXES = ("lwg_",)

N_COLUMNS = 8


class TreebankError(ValueError):
    """Malformed or invalid treebank input.

    Carries enough context (sentence id, 1-based line number) for the
    caller to locate the offending block.
    """

    def __init__(self, message, sentence_id="?", line_no=None):
        loc = f"sentence {sentence_id!r}"
        if line_no is not None:
            loc += f", line {line_no}"
        super().__init__(f"{loc}: {message}")
        self.sentence_id = sentence_id
        self.line_no = line_no


@dataclass(frozen=True)
class Token:
    index: int          # 1-based surface position
    form: str
    lemma: str
    cpos: str
    pos: str
    feats: str
    head: int           # 0 = root
    deprel: str

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"token index must be >= 1, got {self.index}")
        if self.head < 0:
            raise ValueError(f"head must be >= 0, got {self.head}")
        if self.head == self.index:
            raise ValueError(f"token {self.index} is its own head")
        if not self.deprel:
            raise ValueError(f"token {self.index} has an empty deprel")


@dataclass(frozen=True)
class Constituent:
    """A root dependent plus its transitive dependents (its yield)."""

    head_index: int
    token_indices: tuple[int, ...]  # sorted ascending
    relation: str


@dataclass
class DependencyTree:
    sentence_id: str
    doc_id: str
    position_in_doc: int
    tokens: list[Token]
    _children: dict[int, list[int]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    def __len__(self):
        return len(self.tokens)

    @property
    def root_index(self):
        for tok in self.tokens:
            if tok.head == 0:
                return tok.index
        raise AssertionError("validated tree lost its root")

    def token(self, index):
        return self.tokens[index - 1]

    def forms(self, ordering=None):
        if ordering is None:
            return [t.form for t in self.tokens]
        return [self.tokens[i - 1].form for i in ordering]

    def text(self, ordering=None):
        return " ".join(self.forms(ordering))

    def children(self, index):
        if self._children is None:
            kids: dict[int, list[int]] = {}
            for tok in self.tokens:
                kids.setdefault(tok.head, []).append(tok.index)
            self._children = kids
        return self._children.get(index, [])

    def yield_of(self, index):
        """All indices in the subtree rooted at ``index``, sorted."""
        out = []
        stack = [index]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(self.children(i))
        return sorted(out)

    def validate(self):
        n = len(self.tokens)
        if n == 0:
            raise TreebankError("empty sentence", self.sentence_id)
        for expect, tok in enumerate(self.tokens, start=1):
            if tok.index != expect:
                raise TreebankError(
                    f"token indices not contiguous (expected {expect}, got {tok.index})",
                    self.sentence_id,
                )
            if tok.head > n:
                raise TreebankError(
                    f"token {tok.index} points to nonexistent head {tok.head}",
                    self.sentence_id,
                )
        roots = [t.index for t in self.tokens if t.head == 0]
        if len(roots) == 0:
            raise TreebankError("no root token", self.sentence_id)
        if len(roots) > 1:
            raise TreebankError(f"multiple roots at {roots}", self.sentence_id)
        # Walking up from every token must reach the root without revisits.
        heads = [t.head for t in self.tokens]
        for start in range(1, n + 1):
            seen = set()
            i = start
            while i != 0:
                if i in seen:
                    raise TreebankError(f"cycle through token {i}", self.sentence_id)
                seen.add(i)
                i = heads[i - 1]


def _parse_token_line(line, sentence_id, line_no):
    cols = line.split("\t")
    if len(cols) != N_COLUMNS:
        raise TreebankError(
            f"expected {N_COLUMNS} tab-separated columns, got {len(cols)}",
            sentence_id,
            line_no,
        )
    try:
        index = int(cols[0])
    except ValueError:
        raise TreebankError(f"non-integer ID {cols[0]!r}", sentence_id, line_no) from None
    try:
        head = int(cols[6])
    except ValueError:
        raise TreebankError(f"non-integer HEAD {cols[6]!r}", sentence_id, line_no) from None
    try:
        return Token(index, cols[1], cols[2], cols[3], cols[4], cols[5], head, cols[7])
    except ValueError as exc:
        raise TreebankError(str(exc), sentence_id, line_no) from None


def _iter_blocks(lines: Iterable[str]) -> Iterator[tuple[list[tuple[int, str]], int]]:
    """Group (line_no, line) pairs into blank-line separated blocks."""
    block: list[tuple[int, str]] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if line.strip() == "":
            if block:
                yield block, line_no
                block = []
        else:
            block.append((line_no, line))
    if block:
        yield block, -1


def parse_treebank(
    stream: IO[str] | Iterable[str],
    source_name: str = "treebank",
    on_error: str = "raise",
) -> list[DependencyTree]:
    """Parse a CoNLL-style stream into validated trees.

    ``on_error="raise"`` fails fast on the first bad block;
    ``on_error="skip"`` logs the error and drops the block.  Metadata
    comes from ``#sent_id = X`` / ``#doc_id = Y`` comment lines; absent
    metadata is synthesized as ``<source_name>:<block-ordinal>``.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError(f"on_error must be 'raise' or 'skip', got {on_error!r}")
    trees = []
    doc_positions: dict[str, int] = {}
    for ordinal, (block, _) in enumerate(_iter_blocks(stream)):
        sent_id = None
        doc_id = None
        tokens = []
        try:
            for line_no, line in block:
                if line.startswith("#"):
                    key, _, value = line[1:].partition("=")
                    key = key.strip()
                    if key == "sent_id":
                        sent_id = value.strip()
                    elif key == "doc_id":
                        doc_id = value.strip()
                    continue
                tokens.append(_parse_token_line(line, sent_id or f"{source_name}:{ordinal}", line_no))
            if sent_id is None:
                sent_id = f"{source_name}:{ordinal}"
            if doc_id is None:
                doc_id = source_name
            position = doc_positions.get(doc_id, 0)
            tree = DependencyTree(sent_id, doc_id, position, tokens)
        except TreebankError as exc:
            if on_error == "raise":
                raise
            log.warning("skipping block %d: %s", ordinal, exc)
            continue
        doc_positions[tree.doc_id] = doc_positions.get(tree.doc_id, 0) + 1
        trees.append(tree)
    return trees


def serialize_tree(tree: DependencyTree) -> str:
    lines = [f"#sent_id = {tree.sentence_id}", f"#doc_id = {tree.doc_id}"]
    for t in tree.tokens:
        lines.append(
            "\t".join(
                (str(t.index), t.form, t.lemma, t.cpos, t.pos, t.feats, str(t.head), t.deprel)
            )
        )
    return "\n".join(lines) + "\n"


def serialize_treebank(trees: Sequence[DependencyTree]) -> str:
    return "\n".join(serialize_tree(t) for t in trees)


def is_verbal_complex(
    deprel: str,
    relations: frozenset[str] = VERBAL_COMPLEX_RELATIONS,
    prefixes: tuple[str, ...] = VERBAL_COMPLEX_PREFIXES,
) -> bool:
    return deprel in relations or deprel.startswith(prefixes)


def root_constituents(tree: DependencyTree) -> list[Constituent]:
    """All constituents headed by direct root dependents, in surface order."""
    root = tree.root_index
    cons = [
        Constituent(i, tuple(tree.yield_of(i)), tree.token(i).deprel)
        for i in tree.children(root)
    ]
    cons.sort(key=lambda c: c.token_indices[0])
    return cons


def preverbal_constituents(
    tree: DependencyTree,
    relations: frozenset[str] = VERBAL_COMPLEX_RELATIONS,
    prefixes: tuple[str, ...] = VERBAL_COMPLEX_PREFIXES,
) -> list[Constituent]:
    """The permutable constituents: direct root dependents whose entire
    yield precedes the root token, minus the verbal complex.

    A dependent whose yield straddles the root is not preverbal and is
    excluded (permuting it could not preserve a contiguous sentence).
    """
    root = tree.root_index
    out = []
    for con in root_constituents(tree):
        if is_verbal_complex(con.relation, relations, prefixes):
            continue
        if con.token_indices[-1] < root:
            out.append(con)
    return out


def dependency_length(tree: DependencyTree, ordering: Sequence[int]) -> int:
    """Total intervening-word count over all head-dependent arcs under
    ``ordering`` (token indices in surface order).  Adjacent pairs
    contribute zero.
    """
    n = len(tree.tokens)
    if sorted(ordering) != list(range(1, n + 1)):
        raise ValueError("ordering is not a permutation of the tree's token indices")
    heads = [t.head for t in tree.tokens]
    return kernels.dep_length(heads, list(ordering))
