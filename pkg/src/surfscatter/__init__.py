"""LiDAR patch classification of indoor surfaces into semi-specular and low-specular classes."""

__version__ = "0.1.0"

from .cloud_io import (
    ColumnSchema,
    Dataset,
    DatasetManifest,
    IntensityMode,
    LidarPoint,
    SurfaceClass,
    SurfaceScan,
    linearize_intensity,
    load_dataset,
    parse_point_csv,
    read_manifest,
)
from .features import (
    FeatureMatrix,
    PatchFeatures,
    assign_class,
    elevation_angle,
    log_scale,
    patch_features,
    specularity_db,
    surface_specularity,
)
from .patching import PatchGrid, SurfacePlane, fit_surface_plane, partition_into_patches, patch_count_report
from .pipeline import build_feature_matrix

__all__ = [
    "ColumnSchema", "Dataset", "DatasetManifest", "FeatureMatrix", "IntensityMode", "LidarPoint",
    "PatchFeatures", "PatchGrid", "SurfaceClass", "SurfacePlane", "SurfaceScan", "assign_class",
    "build_feature_matrix", "elevation_angle", "fit_surface_plane", "linearize_intensity", "load_dataset",
    "log_scale", "parse_point_csv", "partition_into_patches", "patch_count_report", "patch_features",
    "read_manifest", "specularity_db", "surface_specularity",
]
