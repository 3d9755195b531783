"""Evaluation harness: family-grouped cross-validation, McNemar's exact
test, likelihood-ratio tests, multicollinearity and correlation
diagnostics, and OLS report tables.

Folds are assigned by family so a reference sentence can never inform
the fold that evaluates its own pairs.  Prediction accuracy is the
percentage of pairs where the trained ranker strictly prefers the
reference over the paired variant (ties count as wrong).
"""

from __future__ import annotations

import json
import logging
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2 as chi2_dist

from wordorder import pairrank
from wordorder.pairrank import PairInstance, RankerModel

log = logging.getLogger(__name__)

CANONICAL = "canonical"
DO_FRONTED = "do_fronted"
IO_FRONTED = "io_fronted"


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: dict[str, int]   # family_id -> fold
    seed: int

    @classmethod
    def build(cls, family_ids: Sequence[str], k: int = 10, seed: int = 0) -> "FoldPlan":
        ids = sorted(set(family_ids))
        if len(ids) < k:
            raise ValueError(f"{len(ids)} families cannot fill {k} folds")
        rng = np.random.default_rng(seed)
        rng.shuffle(ids)
        return cls(k, {fid: i % k for i, fid in enumerate(ids)}, seed)

    def fold_of(self, family_id: str) -> int:
        return self.assignment[family_id]


def construction_tag(relation_sequence: Sequence[str]) -> str:
    """Tag a reference's preverbal relation order.

    do_fronted when a k2 precedes the first k1, io_fronted when a k4
    does (k2 checked first); canonical otherwise or when k1 is absent.
    """
    def first(label):
        return next((i for i, r in enumerate(relation_sequence) if r == label), None)

    k1, k2, k4 = first("k1"), first("k2"), first("k4")
    if k1 is not None:
        if k2 is not None and k2 < k1:
            return DO_FRONTED
        if k4 is not None and k4 < k1:
            return IO_FRONTED
    return CANONICAL


@dataclass
class SubsetResult:
    accuracy: float                     # percent over all pairs
    per_fold: list[float]
    slices: dict[str, float]            # construction tag -> percent
    slice_counts: dict[str, int]
    correct: np.ndarray = field(repr=False)  # per-pair correctness, instance order


@dataclass
class EvalReport:
    subsets: dict[str, list[str]]
    results: dict[str, SubsetResult]
    mcnemar: dict[str, dict]            # "a|b" -> {b, c, p, degenerate}
    lrt: dict[str, dict]                # "reduced->full" -> {chi2, df, p}
    vif: dict[str, float]
    correlations: "CorrelationMatrix"
    ols: dict[str, dict] = field(default_factory=dict)
    n_pairs: int = 0

    def to_json(self) -> str:
        payload = {
            "n_pairs": self.n_pairs,
            "subsets": self.subsets,
            "results": {
                name: {
                    "accuracy": r.accuracy,
                    "per_fold": r.per_fold,
                    "slices": r.slices,
                    "slice_counts": r.slice_counts,
                }
                for name, r in self.results.items()
            },
            "mcnemar": self.mcnemar,
            "lrt": self.lrt,
            "vif": {k: (v if math.isfinite(v) else "inf") for k, v in self.vif.items()},
            "correlations": {
                "names": self.correlations.names,
                "values": [[round(x, 12) for x in row] for row in self.correlations.values.tolist()],
                "degenerate": self.correlations.degenerate,
            },
            "ols": self.ols,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass
class CorrelationMatrix:
    names: list[str]
    values: np.ndarray
    degenerate: list[str]


def mcnemar_exact(preds_a: Sequence[bool], preds_b: Sequence[bool]) -> dict:
    """Exact two-tailed McNemar test on paired correctness vectors.

    b counts pairs only model A got right, c pairs only model B got
    right; p doubles the smaller binomial tail at 0.5 and clamps at 1.
    Exact integer arithmetic throughout, so large discordant counts
    neither overflow nor lose the tiny tails.
    """
    if len(preds_a) != len(preds_b):
        raise ValueError("prediction vectors differ in length")
    b = sum(1 for x, y in zip(preds_a, preds_b) if x and not y)
    c = sum(1 for x, y in zip(preds_a, preds_b) if y and not x)
    n = b + c
    if n == 0:
        return {"b": 0, "c": 0, "p": 1.0, "degenerate": True}
    tail = 0
    binom = 1  # C(n, 0), updated incrementally
    for i in range(min(b, c) + 1):
        if i > 0:
            binom = binom * (n - i + 1) // i
        tail += binom
    p = float(min(Fraction(2 * tail, 2**n), Fraction(1)))
    return {"b": b, "c": c, "p": p, "degenerate": False}


def likelihood_ratio_test(full_fit: RankerModel, reduced_fit: RankerModel) -> dict:
    """2*(LL_full - LL_reduced) against the chi-square upper tail.

    Identical feature sets are allowed (chi2 = 0, df = 0, p = 1); a
    reduced model whose features are not a subset of the full model's
    is an error.
    """
    full_feats = set(full_fit.feature_names)
    red_feats = set(reduced_fit.feature_names)
    if not red_feats <= full_feats:
        raise ValueError("models are not nested")
    if full_fit.fit_meta.get("n_instances") != reduced_fit.fit_meta.get("n_instances"):
        raise ValueError("fits were made on different instance sets")
    chi2 = 2.0 * (full_fit.fit_meta["loglik"] - reduced_fit.fit_meta["loglik"])
    chi2 = max(chi2, 0.0)
    df = len(full_feats) - len(red_feats)
    if df == 0:
        return {"chi2": chi2, "df": 0, "p": 1.0}
    return {"chi2": chi2, "df": df, "p": float(chi2_dist.sf(chi2, df))}


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, float, np.ndarray]:
    """beta, R^2, residual SE, coef SEs for y ~ X (X includes intercept)."""
    n, p = X.shape
    xtx = X.T @ X
    rank = np.linalg.matrix_rank(xtx)
    if rank < p:
        log.warning("singular OLS design (rank %d < %d); using pseudo-inverse", rank, p)
        xtx_inv = np.linalg.pinv(xtx)
    else:
        xtx_inv = np.linalg.inv(xtx)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    dof = max(n - rank, 1)
    resid_se = math.sqrt(rss / dof)
    coef_se = resid_se * np.sqrt(np.maximum(np.diag(xtx_inv), 0.0))
    return beta, r2, resid_se, coef_se


def ols_report(
    instances: Sequence[PairInstance],
    feature_subset: Sequence[str] | None = None,
) -> dict:
    """Linear-model companion table: label regressed on raw deltas."""
    X, y, names = pairrank.design_matrix(instances, feature_subset)
    design = np.column_stack([np.ones(len(X)), X])
    beta, r2, resid_se, coef_se = _ols(design, y)
    rows = {"intercept": {"beta": float(beta[0]), "se": float(coef_se[0])}}
    for name, b, s in zip(names, beta[1:], coef_se[1:]):
        rows[name] = {"beta": float(b), "se": float(s)}
    for row in rows.values():
        if row["se"] > 0:
            row["t"] = row["beta"] / row["se"]
        else:
            row["t"] = 0.0 if row["beta"] == 0 else math.copysign(math.inf, row["beta"])
    return {"coefficients": rows, "r_squared": r2, "residual_se": resid_se, "n": len(y)}


def vif(feature_matrix: np.ndarray, names: Sequence[str]) -> dict[str, float]:
    """1 / (1 - R^2_j) from regressing each column on all the others."""
    X = np.asarray(feature_matrix, dtype=np.float64)
    n, p = X.shape
    if p < 2:
        raise ValueError("VIF needs at least two features")
    if n <= p:
        raise ValueError(f"VIF needs more rows ({n}) than features ({p})")
    out = {}
    for j, name in enumerate(names):
        others = np.column_stack([np.ones(n), np.delete(X, j, axis=1)])
        _, r2, _, _ = _ols(others, X[:, j])
        if r2 >= 1.0 - 1e-12:
            out[name] = math.inf
        else:
            out[name] = 1.0 / (1.0 - r2)
    return out


def pearson_matrix(feature_matrix: np.ndarray, names: Sequence[str]) -> CorrelationMatrix:
    X = np.asarray(feature_matrix, dtype=np.float64)
    sds = X.std(axis=0)
    degenerate = [n for n, s in zip(names, sds) if s == 0.0]
    values = np.full((X.shape[1], X.shape[1]), np.nan)
    ok = np.where(sds > 0)[0]
    if len(ok) > 0:
        sub = np.corrcoef(X[:, ok], rowvar=False)
        sub = np.atleast_2d(sub)
        for a, ia in enumerate(ok):
            for b, ib in enumerate(ok):
                values[ia, ib] = sub[a, b]
    if degenerate:
        log.warning("zero-variance column(s) in correlation matrix: %s", degenerate)
    return CorrelationMatrix(list(names), values, degenerate)


def pair_correct(model: RankerModel, instances: Sequence[PairInstance]) -> np.ndarray:
    """True where the model strictly prefers the reference of each pair."""
    out = np.zeros(len(instances), dtype=bool)
    for i, inst in enumerate(instances):
        s = model.score(inst.delta)
        out[i] = s > 0 if inst.label == 1 else s < 0
    return out


def cross_validate(
    instances: Sequence[PairInstance],
    fold_plan: FoldPlan,
    feature_subsets: Mapping[str, Sequence[str]],
    construction_tags: Mapping[str, str] | None = None,
) -> dict[str, SubsetResult]:
    """Held-out prefers-reference accuracy per feature subset.

    The classifier trains on the full training partition of each fold;
    construction slices only restrict which test pairs are tallied.
    """
    available = set(instances[0].delta)
    for name, feats in feature_subsets.items():
        missing = [f for f in feats if f not in available]
        if missing:
            raise KeyError(f"subset {name!r} references missing feature(s) {missing}")
    for inst in instances:
        if inst.family_id not in fold_plan.assignment:
            raise KeyError(f"family {inst.family_id!r} missing from the fold plan")

    folds = np.array([fold_plan.fold_of(i.family_id) for i in instances])
    tags = None
    if construction_tags is not None:
        tags = np.array([construction_tags.get(i.family_id, CANONICAL) for i in instances])

    results = {}
    for name, feats in feature_subsets.items():
        correct = np.zeros(len(instances), dtype=bool)
        per_fold = []
        for f in range(fold_plan.k):
            test_mask = folds == f
            train = [inst for inst, m in zip(instances, test_mask) if not m]
            test = [inst for inst, m in zip(instances, test_mask) if m]
            if not test:
                per_fold.append(float("nan"))
                continue
            model = pairrank.fit(train, feature_subset=feats)
            fold_correct = pair_correct(model, test)
            correct[test_mask] = fold_correct
            per_fold.append(100.0 * fold_correct.mean())
        slices = {}
        counts = {}
        if tags is not None:
            for tag in (DO_FRONTED, IO_FRONTED, CANONICAL):
                mask = tags == tag
                counts[tag] = int(mask.sum())
                slices[tag] = 100.0 * correct[mask].mean() if mask.any() else float("nan")
        results[name] = SubsetResult(
            accuracy=100.0 * correct.mean(),
            per_fold=per_fold,
            slices=slices,
            slice_counts=counts,
            correct=correct,
        )
    return results


def nested_pairs(subsets: Mapping[str, Sequence[str]]) -> list[tuple[str, str]]:
    """(reduced, full) subset names differing by exactly one feature."""
    out = []
    for red_name, red in subsets.items():
        for full_name, full in subsets.items():
            if red_name != full_name and set(red) < set(full) and len(full) == len(red) + 1:
                out.append((red_name, full_name))
    return sorted(out)


def evaluate(
    instances: Sequence[PairInstance],
    fold_plan: FoldPlan,
    feature_subsets: Mapping[str, Sequence[str]],
    construction_tags: Mapping[str, str] | None = None,
) -> EvalReport:
    """Full harness: CV accuracies, McNemar between consecutive subset
    rows, single-feature-addition LRTs on the full instance set, VIF,
    correlations, and the OLS companion table.
    """
    results = cross_validate(instances, fold_plan, feature_subsets, construction_tags)

    mcnemar = {}
    names = list(feature_subsets)
    for a, b in zip(names, names[1:]):
        mcnemar[f"{a}|{b}"] = mcnemar_exact(results[a].correct, results[b].correct)

    lrt = {}
    full_fits: dict[str, RankerModel] = {}
    for red_name, full_name in nested_pairs(feature_subsets):
        for name in (red_name, full_name):
            if name not in full_fits:
                full_fits[name] = pairrank.fit(instances, feature_subset=feature_subsets[name])
        lrt[f"{red_name}->{full_name}"] = likelihood_ratio_test(
            full_fits[full_name], full_fits[red_name]
        )

    feat_names = sorted(set(instances[0].delta))
    X = np.array([[inst.delta[n] for n in feat_names] for inst in instances])
    usable = [j for j in range(X.shape[1]) if X[:, j].std() > 0]
    vif_scores = {}
    if len(usable) >= 2:
        vif_scores = vif(X[:, usable], [feat_names[j] for j in usable])
    correlations = pearson_matrix(X, feat_names)
    ols = {"all": ols_report(instances)}

    return EvalReport(
        subsets={k: list(v) for k, v in feature_subsets.items()},
        results=results,
        mcnemar=mcnemar,
        lrt=lrt,
        vif=vif_scores,
        correlations=correlations,
        ols=ols,
        n_pairs=len(instances),
    )


def format_report(report: EvalReport) -> str:
    """Human-readable dump mirroring the accuracy/regression table layout."""
    lines = []
    lines.append(f"Prediction accuracy ({report.n_pairs} pairs, 10-fold CV by family)")
    header = f"{'subset':<24}{'full %':>8}"
    has_slices = any(r.slices for r in report.results.values())
    if has_slices:
        header += f"{'DO %':>8}{'IO %':>8}"
    lines.append(header)
    for name, r in report.results.items():
        row = f"{name:<24}{r.accuracy:>8.2f}"
        if has_slices:
            do = r.slices.get(DO_FRONTED, float('nan'))
            io = r.slices.get(IO_FRONTED, float('nan'))
            row += f"{do:>8.2f}{io:>8.2f}"
        lines.append(row)
    if report.mcnemar:
        lines.append("")
        lines.append("McNemar exact two-tailed (consecutive rows)")
        for key, m in report.mcnemar.items():
            lines.append(f"  {key:<32} b={m['b']:<6} c={m['c']:<6} p={m['p']:.4f}")
    if report.lrt:
        lines.append("")
        lines.append("Likelihood-ratio tests (full transformed set)")
        for key, t in report.lrt.items():
            lines.append(f"  {key:<32} chi2={t['chi2']:.2f} df={t['df']} p={t['p']:.4g}")
    if report.vif:
        lines.append("")
        lines.append("Variance inflation factors")
        for name, v in report.vif.items():
            lines.append(f"  {name:<24}{v:>10.2f}")
    for subset, table in report.ols.items():
        lines.append("")
        lines.append(
            f"OLS report [{subset}]  R^2={table['r_squared']:.3f} "
            f"residual SE={table['residual_se']:.3f} (n={table['n']})"
        )
        lines.append(f"  {'predictor':<24}{'beta':>10}{'se':>10}{'t':>10}")
        for name, row in table["coefficients"].items():
            lines.append(f"  {name:<24}{row['beta']:>10.4f}{row['se']:>10.4f}{row['t']:>10.2f}")
    lines.append("")
    lines.append("Pearson correlations")
    names = report.correlations.names
    lines.append("  " + " ".join(f"{n[:10]:>10}" for n in [""] + names))
    for i, n in enumerate(names):
        row = " ".join(f"{report.correlations.values[i, j]:>10.3f}" for j in range(len(names)))
        lines.append(f"  {n[:10]:>10} {row}")
    return "\n".join(lines) + "\n"
