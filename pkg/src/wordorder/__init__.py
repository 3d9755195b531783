"""Word-order preference modeling toolkit.

Builds grammatical word-order variants from dependency treebanks, scores
them with cognitive features (dependency length, trigram and cache
surprisal, information status, external neural columns), learns which
orderings are preferred via pairwise-ranking logistic regression, and
evaluates with cross-validation, McNemar/likelihood-ratio tests, and a
forced-choice human judgment service.
"""

__version__ = "0.1.0"
