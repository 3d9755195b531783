"""Synthetic mini-treebank for smoke and acceptance runs.

Every sentence has a fixed skeleton: ``n_constituents`` preverbal
constituents of one to three tokens (content stem, optional
postposition-like clitic, optional modifier), a root verb, and one
auxiliary.  Constituent widths vary so dependency length actually
responds to reordering.  Reference word orders are planted to be
trigram-predictable: each family's preverbal tokens are a consecutive
window of a circular lexicon chain, and the language-model corpus is the
reference texts themselves, so any permutation of the constituents
breaks high-frequency transitions and raises surprisal.  Dependency
relations are shuffled independently of the words, which makes the
attested-bigram filter permissive and gives every construction tag a
chance to occur.

``python -m wordorder.toydata OUTDIR`` writes treebank.conll and
lm_corpus.txt for CLI experiments.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from wordorder.treebank import DependencyTree, Token, serialize_treebank

RELATIONS = ["k1", "k2", "k4", "k7t", "k3"]
PRONOUNS = ["yah", "vah", "ye"]
VERBS = ["kiya", "hua", "gaya", "diya", "liya", "raha", "baitha", "mila"]
AUX = "hai"


@dataclass
class ToyCorpus:
    trees: list[DependencyTree]

    @property
    def treebank_text(self):
        return serialize_treebank(self.trees)

    @property
    def lm_corpus_text(self):
        return "".join(t.text() + "\n" for t in self.trees)


def generate(
    n_families: int = 200,
    doc_size: int = 10,
    n_constituents: int = 5,
    seed: int = 0,
    chain_len: int = 400,
    start_grid: int = 4,
    pronoun_rate: float = 0.3,
) -> ToyCorpus:
    rng = np.random.default_rng(seed)
    chain = [f"w{i:03d}" for i in range(chain_len)]
    trees = []
    for fam in range(n_families):
        doc = fam // doc_size
        pos_in_doc = fam % doc_size
        start = int(rng.integers(0, chain_len // start_grid)) * start_grid
        relations = list(RELATIONS[:n_constituents])
        rng.shuffle(relations)
        verb_form = VERBS[start % len(VERBS)]
        widths = [int(w) for w in rng.integers(1, 4, size=n_constituents)]

        verb_idx = sum(widths) + 1
        tokens = []
        offset = 0
        for j in range(n_constituents):
            stem_idx = offset + 1
            stem_form = chain[(start + offset) % chain_len]
            stem_pos = "NN"
            if relations[j] == "k1" and rng.random() < pronoun_rate:
                stem_form = PRONOUNS[int(rng.integers(len(PRONOUNS)))]
                stem_pos = "PRP"
            tokens.append(
                Token(stem_idx, stem_form, stem_form, stem_pos, stem_pos, "_", verb_idx, relations[j])
            )
            for extra, (pos_tag, deprel) in enumerate(
                (("PSP", "lwg_psp"), ("JJ", "nmod"))[: widths[j] - 1], start=1
            ):
                form = chain[(start + offset + extra) % chain_len]
                tokens.append(
                    Token(stem_idx + extra, form, form, pos_tag, pos_tag, "_", stem_idx, deprel)
                )
            offset += widths[j]
        tokens.append(Token(verb_idx, verb_form, verb_form, "VM", "VM", "_", 0, "root"))
        tokens.append(Token(verb_idx + 1, AUX, AUX, "VAUX", "VAUX", "_", verb_idx, "lwg_vaux"))

        trees.append(
            DependencyTree(f"d{doc:03d}s{pos_in_doc:02d}", f"d{doc:03d}", pos_in_doc, tokens)
        )
    return ToyCorpus(trees)


def write(corpus: ToyCorpus, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    treebank_path = out / "treebank.conll"
    lm_path = out / "lm_corpus.txt"
    treebank_path.write_text(corpus.treebank_text, encoding="utf-8")
    lm_path.write_text(corpus.lm_corpus_text, encoding="utf-8")
    return treebank_path, lm_path


def main(argv=None):
    args = sys.argv[1:] if argv is None else argv
    out_dir = args[0] if args else "toy_corpus"
    n_families = int(args[1]) if len(args) > 1 else 200
    seed = int(args[2]) if len(args) > 2 else 0
    tb, lm = write(generate(n_families=n_families, seed=seed), out_dir)
    print(f"wrote {tb} and {lm}")


if __name__ == "__main__":
    main()
