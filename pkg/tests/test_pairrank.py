import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wordorder.features import FeatureVector
from wordorder.pairrank import (
    PairInstance,
    RankerModel,
    TransformError,
    design_matrix,
    fit,
    joachims_transform,
    loglik_and_grad,
    predict_choice,
    sigmoid,
    write_pair_csv,
)


def fv(sid, fam, is_ref, **values):
    return FeatureVector(sid, fam, is_ref, {k: float(v) for k, v in values.items()})


@pytest.fixture
def worked_example():
    """The three-sentence family with dependency length, n-gram surprisal
    and parser surprisal columns used throughout the transform tests."""
    return [
        fv("ref", "f1", True, dep_length=18, ngram_surp=24.69, pcfg_surp=61.13),
        fv("v1", "f1", False, dep_length=20, ngram_surp=23.80, pcfg_surp=60.67),
        fv("v2", "f1", False, dep_length=18, ngram_surp=23.02, pcfg_surp=60.02),
    ]


class TestTransform:
    def test_worked_example_deltas_and_labels(self, worked_example):
        inst = joachims_transform(worked_example, alternation_seed=0)
        assert inst[0].label == 0
        assert inst[0].delta == pytest.approx(
            {"dep_length": 2.0, "ngram_surp": -0.89, "pcfg_surp": -0.46}, abs=1e-9
        )
        assert (inst[0].left_id, inst[0].right_id) == ("v1", "ref")
        assert inst[1].label == 1
        assert inst[1].delta == pytest.approx(
            {"dep_length": 0.0, "ngram_surp": 1.67, "pcfg_surp": 1.11}, abs=1e-9
        )
        assert (inst[1].left_id, inst[1].right_id) == ("ref", "v2")

    def test_identical_variant_gives_zero_delta(self):
        vectors = [fv("r", "f", True, x=3), fv("v", "f", False, x=3)]
        inst = joachims_transform(vectors)
        assert inst[0].delta == {"x": 0.0}

    def test_opposite_orientations_negate(self, worked_example):
        ref, v1, _ = worked_example
        a = joachims_transform([ref, v1], alternation_seed=0)[0]          # position 0: v - r
        b = joachims_transform([ref, v1, worked_example[2]], 0)[1]        # position 1: r - v2
        # same pair in both orientations must have exactly negated deltas
        forward = {k: ref.values[k] - v1.values[k] for k in ref.values}
        assert a.delta == {k: -v for k, v in forward.items()}

    def test_family_without_reference_rejected(self):
        with pytest.raises(TransformError, match="reference"):
            joachims_transform([fv("v", "f", False, x=1)])

    def test_family_without_variants_rejected(self):
        with pytest.raises(TransformError, match="variants"):
            joachims_transform([fv("r", "f", True, x=1)])

    def test_determinism_and_seed_sensitivity(self):
        vectors = []
        for fam in range(6):
            vectors.append(fv(f"r{fam}", f"f{fam}", True, x=fam))
            for v in range(3):
                vectors.append(fv(f"v{fam}.{v}", f"f{fam}", False, x=fam + v + 1))
        assert joachims_transform(vectors, 5) == joachims_transform(vectors, 5)
        assert joachims_transform(vectors, 5) != joachims_transform(vectors, 6)

    @given(
        sizes=st.lists(st.integers(min_value=1, max_value=7), min_size=1, max_size=12),
        seed=st.integers(min_value=0, max_value=1000),
    )
    @settings(max_examples=40, deadline=None)
    def test_label_balance(self, sizes, seed):
        vectors = []
        for fam, n_var in enumerate(sizes):
            vectors.append(fv(f"r{fam}", f"f{fam}", True, x=fam))
            for v in range(n_var):
                vectors.append(fv(f"v{fam}.{v}", f"f{fam}", False, x=v))
        inst = joachims_transform(vectors, seed)
        ones = sum(i.label for i in inst)
        assert abs(ones - (len(inst) - ones)) <= 1


class TestFit:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        X = np.column_stack([np.ones(80), rng.normal(size=(80, 3))])
        y = (rng.random(80) < 0.5).astype(float)
        h = 1e-6
        for _ in range(20):
            beta = rng.normal(scale=0.8, size=4)
            _, grad = loglik_and_grad(X, y, beta)
            for j in range(4):
                e = np.zeros(4)
                e[j] = h
                ll_plus, _ = loglik_and_grad(X, y, beta + e)
                ll_minus, _ = loglik_and_grad(X, y, beta - e)
                numeric = (ll_plus - ll_minus) / (2 * h)
                assert abs(grad[j] - numeric) <= 1e-6 * max(1.0, abs(numeric))

    def test_perfect_separation_flagged_with_positive_weight(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=400)
        inst = [
            PairInstance("f", int(x > 0), {"x": float(x)}, "l", "r") for x in xs
        ]
        model = fit(inst)
        assert model.fit_meta["separation"]
        assert model.raw_weights["x"] > 0
        assert math.isfinite(model.raw_weights["x"])

    def test_coin_flip_labels_give_small_t_values(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(10000, 2))
        y = rng.random(10000) < 0.5
        inst = [
            PairInstance("f", int(t), {"a": float(a), "b": float(b)}, "l", "r")
            for (a, b), t in zip(X, y)
        ]
        model = fit(inst)
        assert all(abs(t) < 3 for t in model.fit_meta["t_values"].values())

    def test_recovers_known_weights(self):
        rng = np.random.default_rng(1234)
        w_true = np.array([0.8, -0.5])
        X = rng.normal(size=(50000, 2))
        y = rng.random(50000) < sigmoid(X @ w_true)
        inst = [
            PairInstance("f", int(t), {"a": float(a), "b": float(b)}, "l", "r")
            for (a, b), t in zip(X, y)
        ]
        model = fit(inst)
        assert model.raw_weights["a"] == pytest.approx(0.8, abs=0.05)
        assert model.raw_weights["b"] == pytest.approx(-0.5, abs=0.05)
        assert model.fit_meta["converged"]

    def test_needs_both_labels(self):
        inst = [PairInstance("f", 1, {"x": 1.0}, "l", "r")] * 4
        with pytest.raises(ValueError, match="label"):
            fit(inst)

    def test_zero_variance_feature_dropped(self, caplog):
        rng = np.random.default_rng(2)
        inst = [
            PairInstance("f", int(rng.random() < 0.5), {"x": float(rng.normal()), "const": 1.0}, "l", "r")
            for _ in range(100)
        ]
        with caplog.at_level("WARNING"):
            model = fit(inst)
        assert model.feature_names == ["x"]
        assert "const" in model.fit_meta["dropped_features"]

    def test_collinear_column_dropped(self, caplog):
        rng = np.random.default_rng(3)
        xs = rng.normal(size=300)
        y = rng.random(300) < sigmoid(xs)
        inst = [
            PairInstance("f", int(t), {"x": float(v), "x2": float(2 * v)}, "l", "r")
            for v, t in zip(xs, y)
        ]
        with caplog.at_level("WARNING"):
            model = fit(inst)
        assert len(model.feature_names) == 1
        assert len(model.fit_meta["dropped_features"]) == 1

    def test_unstandardized_fit_matches_standardized_raw_weights(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(5000, 2)) * [2.0, 0.3]
        y = rng.random(5000) < sigmoid(X @ np.array([0.7, -1.1]))
        inst = [
            PairInstance("f", int(t), {"a": float(a), "b": float(b)}, "l", "r")
            for (a, b), t in zip(X, y)
        ]
        std = fit(inst, standardize=True)
        raw = fit(inst, standardize=False)
        assert std.raw_weights["a"] == pytest.approx(raw.raw_weights["a"], rel=1e-4)
        assert std.raw_weights["b"] == pytest.approx(raw.raw_weights["b"], rel=1e-4)
        assert std.fit_meta["loglik"] == pytest.approx(raw.fit_meta["loglik"], rel=1e-6)

    def test_scale_absorption(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(2000, 2))
        y = rng.random(2000) < sigmoid(X @ np.array([0.9, -0.4]))
        inst = [
            PairInstance("f", int(t), {"a": float(a), "b": float(b)}, "l", "r")
            for (a, b), t in zip(X, y)
        ]
        scaled = [
            PairInstance(i.family_id, i.label, {"a": 10.0 * i.delta["a"], "b": i.delta["b"]}, i.left_id, i.right_id)
            for i in inst
        ]
        m1, m2 = fit(inst), fit(scaled)
        d1 = [m1.score(i.delta) > 0 for i in inst]
        d2 = [m2.score(i.delta) > 0 for i in scaled]
        assert d1 == d2
        assert m2.raw_weights["a"] == pytest.approx(m1.raw_weights["a"] / 10.0, rel=1e-6)


class TestPredictChoice:
    def model(self, **weights):
        names = list(weights)
        return RankerModel(
            feature_names=names,
            weights={n: w for n, w in weights.items()},
            intercept=0.3,
            scaler={n: (0.0, 1.0) for n in names},
            raw_weights={n: float(w) for n, w in weights.items()},
            raw_intercept=0.3,
        )

    def test_equal_vectors_tie(self):
        m = self.model(x=1.0)
        a = fv("a", "f", True, x=2)
        b = fv("b", "f", False, x=2)
        pred = predict_choice(m, a, b)
        assert pred.tie
        assert not pred.prefers_reference
        assert pred.probability == 0.5

    def test_unit_weight_sigmoid_value(self):
        m = self.model(x=1.0)
        pred = predict_choice(m, fv("a", "f", True, x=2), fv("b", "f", False, x=1))
        assert pred.prefers_reference
        assert pred.probability == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-12)

    def test_flipping_arguments_negates_score(self):
        m = self.model(x=0.7, y=-0.2)
        a = fv("a", "f", True, x=2, y=5)
        b = fv("b", "f", False, x=1, y=9)
        fwd = predict_choice(m, a, b)
        rev = predict_choice(m, b, a)
        assert fwd.prefers_reference != rev.prefers_reference
        assert fwd.probability + rev.probability == pytest.approx(1.0, abs=1e-12)

    def test_intercept_excluded_from_scoring(self):
        m = self.model(x=1.0)
        # raw_intercept 0.3 must not tip a zero delta
        pred = predict_choice(m, fv("a", "f", True, x=5), fv("b", "f", False, x=5))
        assert pred.tie

    def test_key_mismatch_rejected(self):
        m = self.model(x=1.0)
        with pytest.raises(KeyError):
            predict_choice(m, fv("a", "f", True, z=1), fv("b", "f", False, z=2))


@given(
    weights=st.lists(st.floats(-3, 3), min_size=1, max_size=5),
    left=st.lists(st.floats(-50, 50), min_size=5, max_size=5),
    right=st.lists(st.floats(-50, 50), min_size=5, max_size=5),
)
@settings(max_examples=60, deadline=None)
def test_prediction_probabilities_are_antisymmetric(weights, left, right):
    names = [f"f{i}" for i in range(len(weights))]
    model = RankerModel(
        feature_names=names,
        weights=dict(zip(names, weights)),
        intercept=0.7,
        scaler={n: (0.0, 1.0) for n in names},
        raw_weights=dict(zip(names, weights)),
        raw_intercept=0.7,
    )
    a = fv("a", "f", True, **dict(zip(names, left[: len(names)])))
    b = fv("b", "f", False, **dict(zip(names, right[: len(names)])))
    fwd = predict_choice(model, a, b)
    rev = predict_choice(model, b, a)
    assert abs(fwd.probability + rev.probability - 1.0) <= 1e-12


def test_model_json_round_trip():
    rng = np.random.default_rng(6)
    inst = [
        PairInstance("f", int(rng.random() < 0.5), {"x": float(rng.normal())}, "l", "r")
        for _ in range(200)
    ]
    model = fit(inst)
    clone = RankerModel.from_json(model.to_json())
    assert clone.raw_weights == model.raw_weights
    assert clone.scaler == model.scaler
    assert clone.fit_meta["loglik"] == model.fit_meta["loglik"]
    assert json.loads(model.to_json())["feature_names"] == ["x"]


def test_pair_csv_layout(worked_example):
    import io

    inst = joachims_transform(worked_example)
    buf = io.StringIO()
    write_pair_csv(buf, inst)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "family_id,left_id,right_id,label,dep_length,ngram_surp,pcfg_surp"
    assert len(lines) == 3


def test_design_matrix_subset_and_missing_key():
    inst = [PairInstance("f", 1, {"a": 1.0, "b": 2.0}, "l", "r")]
    X, y, names = design_matrix(inst, ["b"])
    assert X.tolist() == [[2.0]]
    with pytest.raises(KeyError):
        design_matrix(inst, ["zz"])
