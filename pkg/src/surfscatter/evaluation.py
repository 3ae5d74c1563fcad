"""Leave-surface-out protocol, metrics, PR curves, k-sweeps and scatter maps."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .cloud_io import SurfaceClass, SurfaceScan, class_tag
from .errors import (
    InvalidSplit,
    KTooLarge,
    SingleClassLabels,
    SingleClassTrainingSet,
    SurfScatterError,
    UnknownTestSurface,
)
from .features import DEFAULT_EPSILON, DEFAULT_THRESHOLD_DB, FeatureMatrix, featurize_scan
from .learners import Prediction, fit_classifier, predict
from .patching import DEFAULT_BIN_SIZE, DEFAULT_MIN_POINTS, partition_into_patches

DEFAULT_TEST_SURFACES = ("metal_tin", "tv", "styrofoam", "fabric_pinboard")
REFERENCE_TRAIN_SURFACES = ("smooth_wood", "concrete_wall", "rough_wood", "cardboard", "drywall", "corkboard",
                        "projector_screen", "linoleum", "carpet", "metal_copper")
CLASS_ORDER = (SurfaceClass.LOW_SPECULAR, SurfaceClass.SEMI_SPECULAR)


@dataclass(frozen=True)
class SplitSpec:
    """Fixed test surfaces plus either ``k`` sampled or explicit training surfaces.

    With ``both_classes`` the sampled training set is redrawn until it holds
    both classes (uniform over the valid draws).
    """

    test_surfaces: tuple[str, ...] = DEFAULT_TEST_SURFACES
    k: int | None = 10
    seed: int = 0
    train_surfaces: tuple[str, ...] | None = None
    both_classes: bool = False

    def to_dict(self) -> dict:
        return {"test_surfaces": list(self.test_surfaces), "k": self.k, "seed": self.seed,
                "train_surfaces": None if self.train_surfaces is None else list(self.train_surfaces),
                "both_classes": self.both_classes}


@dataclass(frozen=True)
class Split:
    train: FeatureMatrix
    test: FeatureMatrix
    train_surfaces: tuple[str, ...]
    test_surfaces: tuple[str, ...]


def surface_classes(fm: FeatureMatrix) -> dict[str, SurfaceClass]:
    out: dict[str, SurfaceClass] = {}
    for (material, _, _), label in zip(fm.provenance, fm.y):
        out.setdefault(material, SurfaceClass(int(label)))
    return out


def leave_surface_out_split(fm: FeatureMatrix, spec: SplitSpec) -> Split:
    """All patches of the test surfaces vs. all patches of the training surfaces.

    With ``spec.train_surfaces`` unset, ``spec.k`` surfaces are drawn
    uniformly without replacement (seeded by ``spec.seed``) from the
    remaining ones, taken in sorted-name order.
    """
    classes = surface_classes(fm)
    test = tuple(spec.test_surfaces)
    unknown = [s for s in test if s not in classes]
    if unknown:
        raise UnknownTestSurface(f"test surfaces not in dataset: {unknown}")
    if len(set(test)) != len(test):
        raise InvalidSplit("duplicate test surfaces")
    per_class = [sum(classes[s] is c for s in test) for c in CLASS_ORDER]
    if per_class != [2, 2]:
        raise InvalidSplit(f"test set must hold two surfaces of each class, got low={per_class[0]}, "
                           f"semi={per_class[1]}")
    remaining = sorted(set(classes) - set(test))
    if spec.train_surfaces is not None:
        train = tuple(spec.train_surfaces)
        missing = [s for s in train if s not in classes]
        if missing:
            raise UnknownTestSurface(f"training surfaces not in dataset: {missing}")
        overlap = set(train) & set(test)
        if overlap:
            raise InvalidSplit(f"surfaces on both sides of the split: {sorted(overlap)}")
    else:
        k = spec.k
        if k is None or k < 1:
            raise InvalidSplit(f"k must be >= 1, got {k}")
        if k > len(remaining):
            raise KTooLarge(f"k={k} but only {len(remaining)} non-test surfaces are available")
        rng = np.random.default_rng(spec.seed)
        if spec.both_classes:
            present = {classes[s] for s in remaining}
            if k < 2 or len(present) < 2:
                raise InvalidSplit(f"k={k} cannot cover both classes")
        while True:
            picked = rng.choice(len(remaining), size=k, replace=False)
            train = tuple(remaining[i] for i in sorted(picked))
            if not spec.both_classes or len({classes[s] for s in train}) == 2:
                break
    return Split(fm.for_materials(train), fm.for_materials(test), train, test)


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """2x2 counts, rows = true class, columns = predicted, order (low, semi)."""
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    undefined: tuple[str, ...] = ()


def precision_recall_f1(cm) -> dict[str, ClassMetrics]:
    """Per-class precision/recall/F1. A 0/0 metric is reported as 0 and
    named in ``undefined``."""
    cm = np.asarray(cm)
    out = {}
    for c in CLASS_ORDER:
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        undefined = []
        if tp + fp == 0:
            precision = 0.0
            undefined.append("precision")
        else:
            precision = tp / (tp + fp)
        if tp + fn == 0:
            recall = 0.0
            undefined.append("recall")
        else:
            recall = tp / (tp + fn)
        if precision + recall == 0:
            f1 = 0.0
            undefined.append("f1")
        else:
            f1 = 2 * precision * recall / (precision + recall)
        out[c.short] = ClassMetrics(precision, recall, f1, tp + fn, tuple(undefined))
    return out


@dataclass(frozen=True)
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def average_precision(self) -> float:
        """Step-wise area: sum over thresholds of (R_i - R_{i+1}) * P_i."""
        r_next = np.append(self.recall[1:], 0.0)
        return float(np.sum((self.recall - r_next) * self.precision))


def pr_curve(y_true, p_semi) -> PrCurve:
    """Semi-specular precision/recall at every distinct score threshold
    (a patch is called semi-specular when its score >= threshold)."""
    y = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(p_semi, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("scores must lie in [0, 1]")
    n_pos = int(np.sum(y == 1))
    if n_pos == 0 or n_pos == len(y):
        raise SingleClassLabels("precision-recall needs both classes")
    thresholds = np.unique(s)
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    tp_cum = np.cumsum(y_sorted == 1)
    # number of rows with score >= t, for each distinct t
    counts = len(s) - np.searchsorted(s_sorted[::-1], thresholds, side="left")
    tp = tp_cum[counts - 1]
    return PrCurve(thresholds, tp / counts, tp / n_pos)


@dataclass
class RunResult:
    model: str
    accuracy: float
    confusion: np.ndarray
    metrics: dict[str, ClassMetrics]
    split: dict
    model_seed: int
    y_true: np.ndarray = field(repr=False, default=None)
    p_semi: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "accuracy": self.accuracy,
            "confusion_matrix": self.confusion.tolist(),
            "confusion_orientation": "rows=true, cols=predicted, order=[low, semi]",
            "metrics": {k: vars(v) | {"undefined": list(v.undefined)} for k, v in self.metrics.items()},
            "split": self.split,
            "model_seed": self.model_seed,
        }


def result_from_predictions(name, y_true, labels, p_semi, split: dict, seed: int) -> RunResult:
    cm = confusion_matrix(y_true, labels)
    acc = float(np.trace(cm) / cm.sum()) if cm.sum() else 0.0
    return RunResult(name, acc, cm, precision_recall_f1(cm), split, seed,
                     np.asarray(y_true), np.asarray(p_semi, dtype=float))


Trainer = Callable[[np.ndarray, np.ndarray, int], object]


def _train(config_or_trainer, X, y, seed, n_jobs=1):
    if callable(config_or_trainer):
        return config_or_trainer(X, y, seed)
    return fit_classifier(config_or_trainer, X, y, seed=seed, n_jobs=n_jobs)


def _predict(model, X):
    if hasattr(model, "n_features"):
        return predict(model, X)
    # bare estimators and test doubles: anything with predict_proba
    probs = np.asarray(model.predict_proba(X), dtype=float).reshape(len(X), 2)
    return Prediction(probs, (probs[:, 1] > probs[:, 0]).astype(np.int64))


def evaluate_once(fm: FeatureMatrix, spec: SplitSpec, model_configs: Mapping[str, object],
                  model_seed: int | None = None, n_jobs: int = 1, keep_models: bool = False):
    """Train every configured model on one split and score it on the test surfaces.

    ``model_configs`` maps a name to a model config or to a callable
    ``(X, y, seed) -> model`` exposing ``predict_proba``. Returns
    ``{name: RunResult}``, plus ``{name: model}`` when ``keep_models``.
    """
    split = leave_surface_out_split(fm, spec)
    if len(np.unique(split.train.y)) < 2:
        raise SingleClassTrainingSet(f"training surfaces {list(split.train_surfaces)} cover one class only")
    seed = spec.seed if model_seed is None else model_seed
    echo = {"train_surfaces": list(split.train_surfaces), "test_surfaces": list(split.test_surfaces),
            "k": len(split.train_surfaces), "split_seed": spec.seed}
    results, models = {}, {}
    for name, cfg in model_configs.items():
        model = _train(cfg, split.train.X, split.train.y, seed, n_jobs)
        pred = _predict(model, split.test.X)
        results[name] = result_from_predictions(name, split.test.y, pred.labels, pred.p_semi, echo, seed)
        models[name] = model
    return (results, models) if keep_models else results


def repetition_seed(master_seed: int, k: int, repetition: int) -> int:
    return int(np.random.SeedSequence([master_seed, k, repetition]).generate_state(1)[0])


@dataclass(frozen=True)
class SweepRow:
    k: int
    model: str
    max: float
    mean: float
    std: float
    min: float
    repetitions: int


@dataclass
class SweepReport:
    rows: list[SweepRow]
    runs: list[dict]
    master_seed: int
    repeats: int

    def row(self, k: int, model: str) -> SweepRow:
        for r in self.rows:
            if r.k == k and r.model == model:
                return r
        raise KeyError((k, model))

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "repeats": self.repeats,
                "rows": [vars(r) for r in self.rows], "runs": self.runs}


def _sweep_job(args):
    fm, test_surfaces, k, rep, master_seed, model_configs = args
    seed = repetition_seed(master_seed, k, rep)
    try:
        spec = SplitSpec(tuple(test_surfaces), k, seed, both_classes=True)
        results = evaluate_once(fm, spec, model_configs, model_seed=seed)
    except SurfScatterError as exc:
        raise SurfScatterError(f"k={k} repetition={rep}: {type(exc).__name__}: {exc}") from exc
    first = next(iter(results.values()))
    return {"k": k, "repetition": rep, "seed": seed, "train_surfaces": first.split["train_surfaces"],
            "accuracy": {name: r.accuracy for name, r in results.items()},
            "confusion": {name: r.confusion.tolist() for name, r in results.items()}}


def sweep(fm: FeatureMatrix, k_values: Sequence[int] = range(2, 12), repeats: int = 50,
          model_configs: Mapping[str, object] | None = None, master_seed: int = 0,
          test_surfaces: Sequence[str] = DEFAULT_TEST_SURFACES, n_jobs: int = 1) -> SweepReport:
    """Repeat the leave-surface-out experiment ``repeats`` times per k.

    Each (k, repetition) gets its own split and model seed derived from
    ``master_seed``; all models share the split. Draws whose training
    surfaces cover a single class are redrawn. Results are reduced in
    (k, repetition) order, so the report does not depend on ``n_jobs``.
    """
    if model_configs is None:
        from .learners import BoostConfig, ForestConfig, MlpConfig
        model_configs = {"forest": ForestConfig(), "gbdt": BoostConfig(), "mlp": MlpConfig()}
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    k_values = [int(k) for k in k_values]
    n_avail = len(set(surface_classes(fm)) - set(test_surfaces))
    too_big = [k for k in k_values if k > n_avail]
    if too_big:
        raise KTooLarge(f"k values {too_big} exceed the {n_avail} available training surfaces")
    jobs = [(fm, tuple(test_surfaces), k, rep, master_seed, model_configs)
            for k in k_values for rep in range(repeats)]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            runs = list(pool.map(_sweep_job, jobs))
    else:
        runs = [_sweep_job(j) for j in jobs]

    rows = []
    for k in k_values:
        for name in model_configs:
            acc = np.array([r["accuracy"][name] for r in runs if r["k"] == k])
            rows.append(SweepRow(k, name, float(acc.max()), float(acc.mean()), float(acc.std()),
                                 float(acc.min()), len(acc)))
    return SweepReport(rows, runs, master_seed, repeats)


@dataclass(frozen=True)
class ScatterRecord:
    material: str
    grid_u: int
    grid_v: int
    x: float
    y: float
    z: float
    predicted: SurfaceClass
    p_semi: float


def scatter_map_from_features(fm: FeatureMatrix, model) -> list[ScatterRecord]:
    if len(fm) == 0:
        return []
    pred = _predict(model, fm.X)
    return [
        ScatterRecord(m, int(gu), int(gv), float(c[0]), float(c[1]), float(c[2]), SurfaceClass(int(lab)), float(p))
        for (m, gu, gv), c, lab, p in zip(fm.provenance, fm.centers, pred.labels, pred.p_semi)
    ]


def build_scatter_map(scans: Sequence[SurfaceScan], model, bin_size: float = DEFAULT_BIN_SIZE,
                      min_points: int = DEFAULT_MIN_POINTS, epsilon: float = DEFAULT_EPSILON,
                      threshold: float = DEFAULT_THRESHOLD_DB) -> list[ScatterRecord]:
    """Patch and featurize each scan, then record one prediction per patch."""
    parts = []
    for scan in scans:
        grid = partition_into_patches(scan, bin_size, min_points)
        # labels are irrelevant here; a fixed label avoids needing intensities > 0 overall
        parts.append(featurize_scan(scan, grid, epsilon, threshold, label=SurfaceClass.LOW_SPECULAR))
    return scatter_map_from_features(FeatureMatrix.concat(parts), model)


SCATTER_COLUMNS = ("material", "grid_u", "grid_v", "x", "y", "z", "class", "p_semi")


def _comment(fh, header_comment):
    if header_comment:
        fh.write(f"# {header_comment}\n")


def write_scatter_map_csv(records, dest, header_comment: str | None = None) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _comment(fh, header_comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCATTER_COLUMNS)
        for r in records:
            w.writerow([r.material, r.grid_u, r.grid_v, repr(r.x), repr(r.y), repr(r.z),
                        class_tag(r.predicted), repr(r.p_semi)])


def write_pr_curve_csv(curve: PrCurve, dest, header_comment: str | None = None) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _comment(fh, header_comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(curve.thresholds, curve.precision, curve.recall):
            w.writerow([repr(float(t)), repr(float(p)), repr(float(r))])


def write_sweep_csv(report: SweepReport, dest, header_comment: str | None = None) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _comment(fh, header_comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "model", "max", "mean", "std"])
        for r in report.rows:
            w.writerow([r.k, r.model, repr(r.max), repr(r.mean), repr(r.std)])


def write_json(obj, dest) -> None:
    with open(dest, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
