import pytest

from wordorder.treebank import DependencyTree, Token


def make_tree(rows, sentence_id="s1", doc_id="d1", position=0):
    """rows: (form, pos, head, deprel) tuples, indexed from 1."""
    tokens = [
        Token(i, form, form, pos, pos, "_", head, deprel)
        for i, (form, pos, head, deprel) in enumerate(rows, start=1)
    ]
    return DependencyTree(sentence_id, doc_id, position, tokens)


@pytest.fixture
def figure_tree():
    """Reconstruction of the running example sentence: five preverbal
    constituents (k4, k1, k7t, k3, pof) before the root verb.

        amar ujala-ko yah sukravar-ko daak-se prapt hua
    """
    return make_tree(
        [
            ("amar", "NNP", 2, "pof_cn"),    # 1
            ("ujala", "NNP", 10, "k4"),      # 2
            ("ko", "PSP", 2, "lwg_psp"),     # 3
            ("yah", "PRP", 10, "k1"),        # 4
            ("sukravar", "NN", 10, "k7t"),   # 5
            ("ko", "PSP", 5, "lwg_psp"),     # 6
            ("daak", "NN", 10, "k3"),        # 7
            ("se", "PSP", 7, "lwg_psp"),     # 8
            ("prapt", "JJ", 10, "pof"),      # 9
            ("hua", "VM", 0, "root"),        # 10
        ]
    )


@pytest.fixture
def context_tree():
    """Preceding-discourse sentence sharing the content words
    "amar ujala": amar ujala-ki bhumika nispaksh rehti hai.
    """
    return make_tree(
        [
            ("amar", "NNP", 2, "pof_cn"),    # 1
            ("ujala", "NNP", 4, "r6"),       # 2
            ("ki", "PSP", 2, "lwg_psp"),     # 3
            ("bhumika", "NN", 6, "k1"),      # 4
            ("nispaksh", "JJ", 6, "k1s"),    # 5
            ("rehti", "VM", 0, "root"),      # 6
            ("hai", "VAUX", 6, "lwg_vaux"),  # 7
        ],
        sentence_id="s0",
    )
