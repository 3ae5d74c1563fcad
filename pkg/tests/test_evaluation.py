import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfscatter.cloud_io import SurfaceClass
from surfscatter.errors import InvalidSplit, SingleClassTrainingSet, KTooLarge, SingleClassLabels, UnknownTestSurface
from surfscatter.evaluation import (
    DEFAULT_TEST_SURFACES,
    REFERENCE_TRAIN_SURFACES,
    SplitSpec,
    build_scatter_map,
    confusion_matrix,
    evaluate_once,
    leave_surface_out_split,
    pr_curve,
    precision_recall_f1,
    result_from_predictions,
    scatter_map_from_features,
    sweep,
    write_pr_curve_csv,
    write_scatter_map_csv,
    write_sweep_csv,
)
from surfscatter.features import FeatureMatrix
from surfscatter.learners import BoostConfig, ForestConfig, MlpConfig, fit_classifier
from surfscatter.synth import SyntheticSurfaceSpec, generate_scan

from conftest import HC, make_scan, mock_features
from reference import TABLE_COUNTS


FM = mock_features()


class Oracle:
    def predict_proba(self, X):
        return np.column_stack([1 - X[:, 0], X[:, 0]])


class ConstantLow:
    def predict_proba(self, X):
        return np.tile([1.0, 0.0], (len(X), 1))


def oracle(X, y, seed):
    return Oracle()


def constant_low(X, y, seed):
    return ConstantLow()


# splits

def test_default_split_counts():
    split = leave_surface_out_split(FM, SplitSpec(k=5, seed=1))
    assert int(np.sum(split.test.y == 1)) == 94 + 85 == 179
    assert int(np.sum(split.test.y == 0)) == 72 + 78 == 150
    assert set(split.test_surfaces) == set(DEFAULT_TEST_SURFACES)


def test_k11_uses_every_remaining_surface():
    splits = [leave_surface_out_split(FM, SplitSpec(k=11, seed=s)) for s in range(5)]
    expected = tuple(sorted(set(TABLE_COUNTS) - set(DEFAULT_TEST_SURFACES)))
    assert all(s.train_surfaces == expected for s in splits)


def test_k12_too_large():
    with pytest.raises(KTooLarge):
        leave_surface_out_split(FM, SplitSpec(k=12))


def test_bad_test_sets():
    with pytest.raises(UnknownTestSurface):
        leave_surface_out_split(FM, SplitSpec(test_surfaces=("metal_tin", "tv", "styrofoam", "granite")))
    with pytest.raises(InvalidSplit):
        leave_surface_out_split(FM, SplitSpec(test_surfaces=("metal_tin", "tv", "whiteboard", "styrofoam")))


def test_explicit_training_surfaces():
    split = leave_surface_out_split(FM, SplitSpec(train_surfaces=REFERENCE_TRAIN_SURFACES))
    assert split.train_surfaces == REFERENCE_TRAIN_SURFACES
    assert len(split.train) == sum(TABLE_COUNTS[s][1] for s in REFERENCE_TRAIN_SURFACES)
    with pytest.raises(InvalidSplit):
        leave_surface_out_split(FM, SplitSpec(train_surfaces=("tv", "carpet")))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 11), st.integers(0, 2**63))
def test_splits_are_disjoint(k, seed):
    split = leave_surface_out_split(FM, SplitSpec(k=k, seed=seed))
    assert not set(split.train.materials) & set(split.test.materials)
    assert len(split.train_surfaces) == k == len(set(split.train_surfaces))


def test_both_classes_redraw():
    for seed in range(200):
        split = leave_surface_out_split(FM, SplitSpec(k=2, seed=seed, both_classes=True))
        assert set(split.train.y.tolist()) == {0, 1}
    with pytest.raises(InvalidSplit):
        leave_surface_out_split(FM, SplitSpec(k=1, both_classes=True))


def test_single_class_split_is_rejected_without_redraw():
    # the only two low surfaces left once the semi ones are excluded
    train = ("carpet", "drywall")
    with pytest.raises(SingleClassTrainingSet):
        evaluate_once(FM, SplitSpec(train_surfaces=train), {"oracle": oracle})


# single runs

def test_oracle_model():
    res = evaluate_once(FM, SplitSpec(k=6, seed=3, both_classes=True), {"oracle": oracle})["oracle"]
    assert res.accuracy == 1.0
    assert res.confusion.tolist() == [[150, 0], [0, 179]]


def test_constant_low_predictor():
    res = evaluate_once(FM, SplitSpec(k=6, seed=3, both_classes=True), {"low": constant_low})["low"]
    assert res.accuracy == pytest.approx(150 / 329, abs=1e-12)
    assert res.metrics["semi"].undefined == ("precision", "f1")
    assert res.confusion.sum(axis=1).tolist() == [150, 179]


def test_real_models_conserve_counts():
    cfgs = {"forest": ForestConfig(n_estimators=10), "gbdt": BoostConfig(n_estimators=10),
            "mlp": MlpConfig(max_epochs=5)}
    results = evaluate_once(FM, SplitSpec(k=4, seed=9, both_classes=True), cfgs)
    for r in results.values():
        assert r.confusion.sum(axis=1).tolist() == [150, 179]
        assert r.accuracy == pytest.approx(np.trace(r.confusion) / 329)


# metrics

def test_metrics_reference_matrix():
    m = precision_recall_f1([[150, 0], [49, 130]])
    # hand computation from the four counts
    assert m["semi"].precision == 1.0
    assert m["semi"].recall == pytest.approx(130 / 179)
    assert m["low"].precision == pytest.approx(150 / 199)
    assert m["low"].recall == 1.0
    assert m["low"].f1 == pytest.approx(2 * (150 / 199) / (150 / 199 + 1))
    assert round(m["low"].precision, 2) == 0.75 and round(m["low"].f1, 2) == 0.86


def test_metrics_diagonal_and_degenerate():
    m = precision_recall_f1([[5, 0], [0, 7]])
    assert all(getattr(c, f) == 1.0 for c in m.values() for f in ("precision", "recall", "f1"))
    m = precision_recall_f1([[0, 0], [3, 4]])
    assert m["low"].recall == 0.0 and "recall" in m["low"].undefined


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_metric_identities(pairs):
    yt, yp = np.array(pairs).T
    r = result_from_predictions("m", yt, yp, yp.astype(float), {}, 0)
    assert r.confusion.sum(axis=1).tolist() == [int(np.sum(yt == 0)), int(np.sum(yt == 1))]
    tp_tn = np.trace(r.confusion)
    assert r.accuracy == pytest.approx(tp_tn / len(yt))
    for c in r.metrics.values():
        if c.precision + c.recall > 0:
            assert c.f1 == pytest.approx(2 * c.precision * c.recall / (c.precision + c.recall))


def test_confusion_orientation():
    assert confusion_matrix([0, 1, 1], [1, 1, 0]).tolist() == [[0, 1], [1, 1]]


# precision-recall curves

def test_pr_perfect_ranking():
    y = np.array([0, 0, 1, 1, 1])
    curve = pr_curve(y, [0.1, 0.2, 0.7, 0.8, 0.9])
    assert np.all(curve.precision[curve.thresholds >= 0.7] == 1.0)
    assert curve.average_precision() == pytest.approx(1.0)


def test_pr_identical_scores():
    curve = pr_curve([0, 1, 1, 0, 1], [0.5] * 5)
    assert curve.thresholds.tolist() == [0.5]
    assert curve.recall.tolist() == [1.0] and curve.precision.tolist() == [0.6]


def test_pr_single_class():
    with pytest.raises(SingleClassLabels):
        pr_curve([1, 1], [0.2, 0.3])


def test_pr_random_scores_ap_near_positive_rate():
    rng = np.random.default_rng(0)
    aps = [pr_curve(np.repeat([0, 1], 200), rng.uniform(size=400)).average_precision() for _ in range(20)]
    assert abs(np.mean(aps) - 0.5) < 0.1


@given(st.lists(st.tuples(st.integers(0, 1), st.floats(0, 1)), min_size=2, max_size=60))
def test_pr_monotone(rows):
    y, s = np.array([r[0] for r in rows]), np.array([r[1] for r in rows])
    if y.min() == y.max():
        return
    curve = pr_curve(y, s)
    assert np.all(np.diff(curve.thresholds) > 0)
    assert np.all(np.diff(curve.recall) <= 0)
    assert curve.recall[0] == 1.0


# sweeps

def test_sweep_oracle_single_repeat():
    report = sweep(FM, [2, 5], repeats=1, model_configs={"oracle": oracle})
    for r in report.rows:
        assert r.mean == r.max == 1.0 and r.std == 0.0 and r.repetitions == 1


def test_sweep_deterministic():
    cfgs = {"forest": ForestConfig(n_estimators=5), "gbdt": BoostConfig(n_estimators=5)}
    a = sweep(FM, [3, 11], repeats=3, model_configs=cfgs, master_seed=42)
    b = sweep(FM, [3, 11], repeats=3, model_configs=cfgs, master_seed=42)
    assert a.to_dict() == b.to_dict()
    for r in a.rows:
        assert r.min <= r.mean <= r.max and r.std >= 0


def test_sweep_rejects_large_k():
    with pytest.raises(KTooLarge):
        sweep(FM, [12], repeats=1, model_configs={"oracle": oracle})


# scatter maps

def test_scatter_map_one_patch_oracle():
    fm = FeatureMatrix(np.array([[1.0, 0, 0]]), np.array([1]), (("m", 0, 0),), np.zeros((1, 6)),
                       np.array([[1.0, 0.1, 0.2]]))
    rec = scatter_map_from_features(fm, Oracle())
    assert len(rec) == 1 and rec[0].predicted is SurfaceClass.SEMI_SPECULAR and rec[0].p_semi == 1.0


def test_scatter_map_empty_grid():
    sparse = make_scan([[1.0, 0, 0], [1.0, 0.5, 0], [1.0, 0, 0.5]], [1, 1, 1])
    assert build_scatter_map([sparse], Oracle(), min_points=5) == []


def test_scatter_map_smooth_panel(synthetic_features):
    model = fit_classifier(ForestConfig(n_estimators=30), synthetic_features.X, synthetic_features.y)
    scan = generate_scan(SyntheticSurfaceSpec(h_rms=0.01 * HC, seed=777))
    records = build_scatter_map([scan], model)
    assert len(records) > 100
    share = np.mean([r.predicted is SurfaceClass.SEMI_SPECULAR for r in records])
    assert share >= 0.95


def test_writers(tmp_path):
    write_scatter_map_csv(scatter_map_from_features(FM.subset(np.arange(3)), Oracle()), tmp_path / "m.csv", "{}")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "# {}" and lines[1].startswith("material,grid_u,grid_v") and len(lines) == 5
    write_pr_curve_csv(pr_curve([0, 1], [0.2, 0.9]), tmp_path / "pr.csv")
    assert (tmp_path / "pr.csv").read_text().splitlines()[0] == "threshold,precision,recall"
    write_sweep_csv(sweep(FM, [2], 1, {"oracle": oracle}), tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 2
