"""Glue from a loaded dataset to patch grids and the feature matrix."""

from __future__ import annotations

from .cloud_io import Dataset
from .features import DEFAULT_EPSILON, DEFAULT_THRESHOLD_DB, FeatureMatrix, featurize_dataset
from .patching import DEFAULT_BIN_SIZE, DEFAULT_MIN_POINTS, PatchGrid, partition_into_patches


def patch_dataset(dataset: Dataset, bin_size: float = DEFAULT_BIN_SIZE,
                  min_points: int = DEFAULT_MIN_POINTS) -> dict[str, PatchGrid]:
    return {scan.material_name: partition_into_patches(scan, bin_size, min_points) for scan in dataset}


def build_feature_matrix(dataset: Dataset, bin_size: float = DEFAULT_BIN_SIZE,
                         min_points: int = DEFAULT_MIN_POINTS, epsilon: float = DEFAULT_EPSILON,
                         threshold: float = DEFAULT_THRESHOLD_DB) -> tuple[dict[str, PatchGrid], FeatureMatrix]:
    grids = patch_dataset(dataset, bin_size, min_points)
    return grids, featurize_dataset(dataset, grids, epsilon, threshold)
