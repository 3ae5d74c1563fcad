"""Per-patch features and the specularity labeling metric."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from .cloud_io import Dataset, SurfaceClass, SurfaceScan, class_tag
from .errors import AllZeroIntensities, EmptyPatch, NegativeIntensity, SurfScatterError, ZeroHorizontalRange
from .patching import Patch, PatchGrid

DEFAULT_EPSILON = 1e-9
DEFAULT_THRESHOLD_DB = 10.0

MODEL_FEATURES = ("mean_elevation_angle", "log_linear_max", "max_to_mean_ratio")


def elevation_angle(point) -> float | np.ndarray:
    """Angle above the sensor's horizontal plane, in degrees.

    Accepts anything with ``x, y, z`` attributes or an ``(..., 3)`` array.
    """
    if hasattr(point, "x"):
        xyz = np.array([point.x, point.y, point.z], dtype=float)
    else:
        xyz = np.asarray(point, dtype=float)
    horiz = np.hypot(xyz[..., 0], xyz[..., 1])
    if np.any(horiz == 0):
        raise ZeroHorizontalRange("point lies on the sensor's vertical axis")
    out = np.degrees(np.arctan(xyz[..., 2] / horiz))
    return float(out) if np.ndim(out) == 0 else out


def log_scale(linear):
    """``ln(1 + linear)``, evaluated with log1p."""
    arr = np.asarray(linear, dtype=float)
    if np.any(arr < 0):
        raise NegativeIntensity(f"negative intensity {arr.min()!r}")
    out = np.log1p(arr)
    return float(out) if out.ndim == 0 else out


def specularity_db(linear_intensities) -> float:
    """Peak-to-average ratio ``10 log10(max / mean)`` in dB."""
    x = np.asarray(linear_intensities, dtype=float).reshape(-1)
    if x.size == 0:
        raise EmptyPatch("no intensities")
    if np.any(x < 0):
        raise NegativeIntensity(f"negative intensity {x.min()!r}")
    mean = x.mean()
    if not mean > 0:
        raise AllZeroIntensities("mean intensity is zero")
    return float(10.0 * np.log10(x.max() / mean))


def assign_class(surface_specularity: float, threshold: float = DEFAULT_THRESHOLD_DB) -> SurfaceClass:
    """Semi-specular iff strictly above ``threshold`` dB."""
    if surface_specularity > threshold:
        return SurfaceClass.SEMI_SPECULAR
    return SurfaceClass.LOW_SPECULAR


def surface_specularity(scan: SurfaceScan) -> float:
    return specularity_db(scan.intensity_linear)


@dataclass(frozen=True)
class PatchFeatures:
    mean_elevation_angle: float
    log_linear_max: float
    log_linear_mean: float
    max_to_mean_ratio: float
    mean_linear: float
    specularity_db: float

    def model_vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in MODEL_FEATURES])


PATCH_FEATURE_FIELDS = tuple(f.name for f in fields(PatchFeatures))


def patch_features(patch: Patch | np.ndarray, scan: SurfaceScan, epsilon: float = DEFAULT_EPSILON) -> PatchFeatures:
    if not epsilon > 0:
        raise SurfScatterError(f"epsilon must be positive, got {epsilon}")
    idx = patch.point_indices if isinstance(patch, Patch) else np.asarray(patch, dtype=np.int64)
    if len(idx) == 0:
        raise EmptyPatch("patch has no points")
    linear = scan.intensity_linear[idx]
    logs = log_scale(linear)
    log_max = float(np.max(logs))
    log_mean = float(np.mean(logs))
    return PatchFeatures(
        mean_elevation_angle=float(np.mean(elevation_angle(scan.xyz[idx]))),
        log_linear_max=log_max,
        log_linear_mean=log_mean,
        max_to_mean_ratio=log_max / (log_mean + epsilon),
        mean_linear=float(np.mean(linear)),
        specularity_db=specularity_db(linear),
    )


@dataclass(frozen=True)
class FeatureMatrix:
    """Model inputs for a set of patches.

    ``X`` holds the three model features in ``MODEL_FEATURES`` order, ``y``
    the class index per row. ``details`` keeps all six patch features for
    diagnostics and dumps; ``provenance`` is ``(material, grid_u, grid_v)``.
    """

    X: np.ndarray
    y: np.ndarray
    provenance: tuple[tuple[str, int, int], ...]
    details: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        n = len(self.X)
        if not (len(self.y) == len(self.provenance) == len(self.details) == len(self.centers) == n):
            raise ValueError("feature matrix columns have different lengths")
        if n and not np.all(np.isfinite(self.X)):
            raise ValueError("non-finite feature values")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def materials(self) -> np.ndarray:
        return np.array([p[0] for p in self.provenance], dtype=object)

    def subset(self, mask) -> "FeatureMatrix":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return FeatureMatrix(self.X[idx], self.y[idx], tuple(self.provenance[i] for i in idx),
                             self.details[idx], self.centers[idx])

    def for_materials(self, names) -> "FeatureMatrix":
        wanted = set(names)
        return self.subset(np.array([p[0] in wanted for p in self.provenance], dtype=bool))

    @classmethod
    def concat(cls, parts) -> "FeatureMatrix":
        parts = list(parts)
        if not parts:
            return cls(np.zeros((0, 3)), np.zeros(0, dtype=np.int64), (),
                       np.zeros((0, len(PATCH_FEATURE_FIELDS))), np.zeros((0, 3)))
        return cls(
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.y for p in parts]),
            tuple(x for p in parts for x in p.provenance),
            np.concatenate([p.details for p in parts]),
            np.concatenate([p.centers for p in parts]),
        )


def surface_label(scan: SurfaceScan, threshold: float = DEFAULT_THRESHOLD_DB) -> SurfaceClass:
    """The manifest class when given, else the whole-surface specularity class."""
    if scan.canonical_class is not None:
        return scan.canonical_class
    return assign_class(surface_specularity(scan), threshold)


def featurize_scan(scan: SurfaceScan, grid: PatchGrid, epsilon: float = DEFAULT_EPSILON,
                   threshold: float = DEFAULT_THRESHOLD_DB, label: SurfaceClass | None = None) -> FeatureMatrix:
    if label is None:
        label = surface_label(scan, threshold)
    feats = [patch_features(p, scan, epsilon) for p in grid.patches]
    details = np.array([[getattr(f, name) for name in PATCH_FEATURE_FIELDS] for f in feats], dtype=float)
    details = details.reshape(-1, len(PATCH_FEATURE_FIELDS))
    cols = [PATCH_FEATURE_FIELDS.index(name) for name in MODEL_FEATURES]
    return FeatureMatrix(
        X=details[:, cols].copy(),
        y=np.full(len(feats), int(label), dtype=np.int64),
        provenance=tuple((scan.material_name, p.grid_u, p.grid_v) for p in grid.patches),
        details=details,
        centers=np.array([p.center for p in grid.patches], dtype=float).reshape(-1, 3),
    )


def featurize_dataset(dataset: Dataset, grids: dict[str, PatchGrid], epsilon: float = DEFAULT_EPSILON,
                      threshold: float = DEFAULT_THRESHOLD_DB) -> FeatureMatrix:
    return FeatureMatrix.concat(
        featurize_scan(scan, grids[scan.material_name], epsilon, threshold) for scan in dataset
    )


FEATURE_CSV_COLUMNS = ("material", "grid_u", "grid_v", "mean_elevation_angle", "log_linear_max",
                       "max_to_mean_ratio", "specularity_db", "label",
                       "log_linear_mean", "mean_linear")


def write_feature_csv(fm: FeatureMatrix, dest, header_comment: str | None = None) -> None:
    """Feature dump; the first eight columns are the documented layout, the
    two trailing columns complete the per-patch record."""
    col = {name: PATCH_FEATURE_FIELDS.index(name) for name in PATCH_FEATURE_FIELDS}
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_CSV_COLUMNS)
        for (material, gu, gv), row, label in zip(fm.provenance, fm.details, fm.y):
            w.writerow([
                material, gu, gv,
                repr(float(row[col["mean_elevation_angle"]])),
                repr(float(row[col["log_linear_max"]])),
                repr(float(row[col["max_to_mean_ratio"]])),
                repr(float(row[col["specularity_db"]])),
                class_tag(SurfaceClass(int(label))),
                repr(float(row[col["log_linear_mean"]])),
                repr(float(row[col["mean_linear"]])),
            ])
