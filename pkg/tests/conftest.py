import os
from pathlib import Path

import numpy as np
import pytest

from surfscatter.cloud_io import REFERENCE_SURFACE_CLASSES, Dataset, SurfaceScan
from surfscatter.features import FeatureMatrix
from surfscatter.synth import SyntheticSurfaceSpec, generate_scan

from reference import TABLE_COUNTS

HC = SyntheticSurfaceSpec().critical_height()


def make_scan(xyz, intensity, name="s", cls=None):
    intensity = np.asarray(intensity, dtype=float)
    return SurfaceScan(name, cls, np.asarray(xyz, dtype=float), intensity, intensity.copy())


def synthetic_panels(n_smooth=4, n_rough=4, seed0=0, prefix=""):
    scans = []
    for i in range(n_smooth):
        spec = SyntheticSurfaceSpec(h_rms=0.02 * i * HC, seed=seed0 + i, material_name=f"{prefix}smooth_{i}")
        scans.append(generate_scan(spec))
    for i in range(n_rough):
        spec = SyntheticSurfaceSpec(h_rms=(2.0 + 0.5 * i) * HC, seed=seed0 + 100 + i,
                                    material_name=f"{prefix}rough_{i}")
        scans.append(generate_scan(spec))
    return scans


def mock_features(seed=0, per_material=None):
    """Feature matrix over the 15 published surfaces (published patch counts
    unless ``per_material`` is given).

    Column 0 carries the class index so an oracle can read labels back.
    """
    rng = np.random.default_rng(seed)
    X, y, prov = [], [], []
    for name, (_, n) in TABLE_COUNTS.items():
        n = per_material or n
        cls = int(REFERENCE_SURFACE_CLASSES[name])
        X.append(np.column_stack([np.full(n, float(cls)), rng.normal(size=(n, 2))]))
        y.append(np.full(n, cls))
        prov += [(name, i, 0) for i in range(n)]
    n = len(prov)
    return FeatureMatrix(np.vstack(X), np.concatenate(y), tuple(prov), np.zeros((n, 6)), np.zeros((n, 3)))


@pytest.fixture(scope="session")
def synthetic_dataset():
    """Six smooth and six rough synthetic panels."""
    return Dataset(tuple(synthetic_panels(6, 6)))


@pytest.fixture(scope="session")
def synthetic_features(synthetic_dataset):
    from surfscatter.pipeline import build_feature_matrix
    return build_feature_matrix(synthetic_dataset)[1]


def dataset_manifest_path():
    """Manifest of the public surface dataset, if available locally."""
    env = os.environ.get("SURFSCATTER_DATA")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parents[1] / "data")
    for c in candidates:
        if c.is_file():
            return c
        if (c / "manifest.json").is_file():
            return c / "manifest.json"
        if c.is_dir() and any(c.rglob("*.csv")):
            return c
    return None


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
