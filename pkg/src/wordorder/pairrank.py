"""Pairwise ranking of reference vs. variant orderings.

Each (reference, variant) pair becomes one training instance whose
predictors are the difference of the two feature vectors; the direction
of the subtraction alternates deterministically so labels stay balanced
(first pair variant-minus-reference with label 0, second
reference-minus-variant with label 1, and so on, counting across a
seeded shuffle of the families).

The ranker itself is unregularized maximum-likelihood logistic
regression fit by Newton/IRLS, with standard errors from the observed
information matrix.  Preference scoring uses the antisymmetric form
w . (phi(ref) - phi(var)) without intercept, so swapping the arguments
negates the score exactly.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

import numpy as np

from wordorder.features import FeatureVector

log = logging.getLogger(__name__)


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class PairInstance:
    family_id: str
    label: int                      # 1: reference-minus-variant, 0: the reverse
    delta: dict[str, float]
    left_id: str
    right_id: str


@dataclass(frozen=True)
class ChoicePrediction:
    prefers_reference: bool
    probability: float
    tie: bool = False


@dataclass
class RankerModel:
    feature_names: list[str]
    weights: dict[str, float]         # standardized units (training scale)
    intercept: float
    scaler: dict[str, tuple[float, float]]  # name -> (mean, sd)
    raw_weights: dict[str, float]     # original delta units, used for scoring
    raw_intercept: float
    fit_meta: dict = field(default_factory=dict)

    def score(self, delta: Mapping[str, float]) -> float:
        """Antisymmetric preference score (no intercept, no mean shift)."""
        return sum(self.raw_weights[name] * delta[name] for name in self.feature_names)

    def to_json(self) -> str:
        payload = {
            "feature_names": self.feature_names,
            "weights": self.weights,
            "intercept": self.intercept,
            "scaler": {k: list(v) for k, v in self.scaler.items()},
            "raw_weights": self.raw_weights,
            "raw_intercept": self.raw_intercept,
            "fit_meta": self.fit_meta,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RankerModel":
        d = json.loads(text)
        return cls(
            d["feature_names"], d["weights"], d["intercept"],
            {k: tuple(v) for k, v in d["scaler"].items()},
            d["raw_weights"], d["raw_intercept"], d["fit_meta"],
        )


def group_by_family(vectors: Sequence[FeatureVector]) -> dict[str, list[FeatureVector]]:
    families: dict[str, list[FeatureVector]] = {}
    for v in vectors:
        families.setdefault(v.family_id, []).append(v)
    return families


def joachims_transform(
    vectors: Sequence[FeatureVector],
    alternation_seed: int = 0,
) -> list[PairInstance]:
    """One delta instance per (reference, variant) pair, orientation
    alternating by global pair position over a seeded family shuffle.
    """
    families = group_by_family(vectors)
    order = sorted(families)
    rng = np.random.default_rng(alternation_seed)
    rng.shuffle(order)

    instances = []
    position = 0
    for family_id in order:
        members = families[family_id]
        references = [v for v in members if v.is_reference]
        variants = [v for v in members if not v.is_reference]
        if len(references) != 1:
            raise TransformError(
                f"family {family_id!r} has {len(references)} reference records (need exactly 1)"
            )
        if not variants:
            raise TransformError(f"family {family_id!r} has no variants")
        ref = references[0]
        for var in variants:
            if position % 2 == 0:
                delta = {k: var.values[k] - ref.values[k] for k in var.values}
                inst = PairInstance(family_id, 0, delta, var.sentence_id, ref.sentence_id)
            else:
                delta = {k: ref.values[k] - var.values[k] for k in ref.values}
                inst = PairInstance(family_id, 1, delta, ref.sentence_id, var.sentence_id)
            instances.append(inst)
            position += 1
    return instances


def design_matrix(
    instances: Sequence[PairInstance],
    feature_subset: Sequence[str] | None = None,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    names = list(feature_subset) if feature_subset is not None else list(instances[0].delta)
    for inst in instances:
        missing = [n for n in names if n not in inst.delta]
        if missing:
            raise KeyError(f"instance {inst.left_id}-{inst.right_id} lacks features {missing}")
    X = np.array([[inst.delta[n] for n in names] for inst in instances], dtype=np.float64)
    y = np.array([inst.label for inst in instances], dtype=np.float64)
    return X, y, names


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -700, 700)))


def loglik_and_grad(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> tuple[float, np.ndarray]:
    """Bernoulli log-likelihood and its analytic gradient.

    ``X`` already includes any intercept column; log terms are computed
    via log1p(exp(.)) for stability.
    """
    eta = X @ beta
    # log sigma(eta) = -log1p(exp(-eta)); log(1 - sigma) = -log1p(exp(eta))
    ll = -(np.logaddexp(0.0, -eta) * y + np.logaddexp(0.0, eta) * (1.0 - y)).sum()
    grad = X.T @ (y - sigmoid(eta))
    return float(ll), grad


def _drop_collinear(design: np.ndarray, names: list[str]) -> tuple[np.ndarray, list[int]]:
    """Greedy maximal independent column subset (intercept always kept)."""
    rank = np.linalg.matrix_rank(design)
    if rank == design.shape[1]:
        return design, list(range(design.shape[1]))
    keep: list[int] = []
    for j in range(design.shape[1]):
        trial = design[:, keep + [j]]
        if np.linalg.matrix_rank(trial) > len(keep):
            keep.append(j)
    dropped = [names[j - 1] for j in range(design.shape[1]) if j not in keep and j > 0]
    log.warning("dropping collinear column(s): %s", dropped)
    return design[:, keep], keep


def fit(
    instances: Sequence[PairInstance],
    standardize: bool = True,
    max_iter: int = 100,
    tol: float = 1e-8,
    feature_subset: Sequence[str] | None = None,
) -> RankerModel:
    """Maximum-likelihood logistic regression over delta instances.

    Convergence when the largest coefficient step or the deviance change
    drops below ``tol``.  Perfect separation does not raise: the fit
    stops with finite weights and ``fit_meta["separation"]`` set.
    """
    if len(instances) < 2:
        raise ValueError("need at least 2 instances")
    X, y, names = design_matrix(instances, feature_subset)
    if len(set(y.tolist())) < 2:
        raise ValueError("both labels must be present")

    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=0)
    dropped_degenerate = [n for n, s in zip(names, sds) if s == 0.0]
    if dropped_degenerate:
        log.warning("dropping zero-variance feature(s): %s", dropped_degenerate)
        keep = [j for j, s in enumerate(sds) if s != 0.0]
        X, names = X[:, keep], [names[j] for j in keep]
        means, sds = means[keep], sds[keep]
    if not names:
        raise ValueError("no usable features remain")

    if standardize:
        Xw = (X - means) / sds
    else:
        Xw = X
    design = np.column_stack([np.ones(len(Xw)), Xw])
    design, kept_cols = _drop_collinear(design, names)
    kept_feature_idx = [j - 1 for j in kept_cols if j > 0]
    dropped_collinear = [n for j, n in enumerate(names) if j not in kept_feature_idx]
    names = [names[j] for j in kept_feature_idx]
    means, sds = means[kept_feature_idx], sds[kept_feature_idx]

    beta = np.zeros(design.shape[1])
    ll, _ = loglik_and_grad(design, y, beta)
    converged = False
    hess_collapsed = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = design @ beta
        p = sigmoid(eta)
        w = p * (1.0 - p)
        if w.max() < 1e-12:
            hess_collapsed = True
            break
        H = design.T @ (design * w[:, None])
        g = design.T @ (y - p)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            hess_collapsed = True
            break
        beta = beta + step
        new_ll, _ = loglik_and_grad(design, y, beta)
        if max(abs(step).max(), abs(2.0 * (new_ll - ll))) < tol:
            ll = new_ll
            converged = True
            break
        ll = new_ll

    p = sigmoid(design @ beta)
    w = p * (1.0 - p)
    H = design.T @ (design * w[:, None])
    cov = np.linalg.pinv(H)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    predicted = (design @ beta > 0).astype(float)
    separated = bool((predicted == y).all() and (not converged or abs(beta).max() > 15.0))
    if separated or hess_collapsed:
        warnings.warn(
            "possible perfect separation; coefficients are not maximum-likelihood finite optima",
            stacklevel=2,
        )

    intercept = float(beta[0])
    coefs = beta[1:]
    if standardize:
        raw_weights = {n: float(c / s) for n, c, s in zip(names, coefs, sds)}
        raw_intercept = float(intercept - sum(c * m / s for c, m, s in zip(coefs, means, sds)))
    else:
        raw_weights = {n: float(c) for n, c in zip(names, coefs)}
        raw_intercept = intercept

    return RankerModel(
        feature_names=names,
        weights={n: float(c) for n, c in zip(names, coefs)},
        intercept=intercept,
        scaler={n: (float(m), float(s)) for n, m, s in zip(names, means, sds)},
        raw_weights=raw_weights,
        raw_intercept=raw_intercept,
        fit_meta={
            "iterations": iterations,
            "loglik": float(ll),
            "converged": converged,
            "separation": separated or hess_collapsed,
            "standardized": standardize,
            "standard_errors": {n: float(s) for n, s in zip(names, se[1:])},
            "intercept_se": float(se[0]),
            "t_values": {
                n: (float(c / s) if s > 0 else math.copysign(math.inf, c) if c else 0.0)
                for n, c, s in zip(names, coefs, se[1:])
            },
            "dropped_features": dropped_degenerate + dropped_collinear,
            "n_instances": len(instances),
        },
    )


def predict_choice(
    model: RankerModel,
    reference_fv: FeatureVector,
    variant_fv: FeatureVector,
) -> ChoicePrediction:
    """Does the model prefer the reference ordering over the variant?

    The score is antisymmetric in the two arguments; an exact zero is
    reported as a tie with ``prefers_reference=False``.
    """
    for fv in (reference_fv, variant_fv):
        missing = [n for n in model.feature_names if n not in fv.values]
        if missing:
            raise KeyError(f"feature vector {fv.sentence_id!r} lacks {missing}")
    delta = {
        n: reference_fv.values[n] - variant_fv.values[n] for n in model.feature_names
    }
    score = model.score(delta)
    if score == 0.0:
        return ChoicePrediction(False, 0.5, tie=True)
    return ChoicePrediction(score > 0.0, float(sigmoid(np.float64(score))))


def write_pair_csv(out: IO[str], instances: Sequence[PairInstance]) -> None:
    names = list(instances[0].delta)
    out.write(",".join(["family_id", "left_id", "right_id", "label"] + names) + "\n")
    for inst in instances:
        row = [inst.family_id, inst.left_id, inst.right_id, str(inst.label)]
        row.extend(repr(inst.delta[n]) for n in names)
        out.write(",".join(row) + "\n")
