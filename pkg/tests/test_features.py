import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfscatter.cloud_io import LidarPoint, SurfaceClass
from surfscatter.errors import AllZeroIntensities, EmptyPatch, ZeroHorizontalRange
from surfscatter.features import (
    assign_class,
    elevation_angle,
    log_scale,
    patch_features,
    specularity_db,
    surface_specularity,
)

from conftest import make_scan


def test_elevation_angle():
    assert elevation_angle(LidarPoint(1, 0, 0, 0, 0)) == 0.0
    assert elevation_angle(LidarPoint(1, 0, 1, 0, 0)) == pytest.approx(math.degrees(math.atan(1)), abs=1e-12)
    with pytest.raises(ZeroHorizontalRange):
        elevation_angle(LidarPoint(0, 0, 1, 0, 0))


def test_log_scale():
    assert log_scale(0) == 0
    assert log_scale(math.e - 1) == pytest.approx(1.0, rel=1e-15)
    # series oracle: ln(1+x) = x - x^2/2 + ...
    x = 1e-12
    assert abs(log_scale(x) - (x - x * x / 2)) / x < 1e-6


def test_specularity_db():
    assert specularity_db([5, 5, 5, 5]) == 0.0
    assert specularity_db([1, 1, 1, 9]) == pytest.approx(4.771212547196624, abs=1e-12)
    with pytest.raises(AllZeroIntensities):
        specularity_db([0, 0, 0, 0])


def test_constant_patch():
    r = 1.1
    pt = [r * math.cos(math.radians(10)), 0.0, r * math.sin(math.radians(10))]
    scan = make_scan([pt] * 4, [5.0] * 4)
    f = patch_features(np.arange(4), scan, 1e-9)
    assert f.mean_elevation_angle == pytest.approx(10.0, abs=1e-12)
    assert f.log_linear_max == f.log_linear_mean == pytest.approx(math.log(6))
    assert f.max_to_mean_ratio == pytest.approx(math.log(6) / (math.log(6) + 1e-9), rel=1e-15)
    assert f.specularity_db == 0.0


def test_worked_example_patch():
    scan = make_scan([[1, 0, 0]] * 4, [1, 1, 1, 9])
    f = patch_features(np.arange(4), scan, 1e-9)
    # values from a 40-digit mpmath evaluation
    assert f.log_linear_max == pytest.approx(2.302585092994046, abs=1e-12)
    assert f.log_linear_mean == pytest.approx(1.0955066586684704, abs=1e-12)
    assert f.max_to_mean_ratio == pytest.approx(2.101844906804007, abs=1e-9)


def test_empty_patch():
    with pytest.raises(EmptyPatch):
        patch_features(np.array([], dtype=int), make_scan([[1, 0, 0]], [1]))


@pytest.mark.parametrize("db, cls", [(10.01, SurfaceClass.SEMI_SPECULAR), (10.0, SurfaceClass.LOW_SPECULAR),
                                     (3.0, SurfaceClass.LOW_SPECULAR)])
def test_assign_class(db, cls):
    assert assign_class(db) is cls


@given(st.floats(-100, 100), st.floats(0, 50))
def test_assign_class_monotone(db, bump):
    if assign_class(db) is SurfaceClass.SEMI_SPECULAR:
        assert assign_class(db + bump) is SurfaceClass.SEMI_SPECULAR


def test_surface_specularity():
    n = 50
    xyz = np.tile([1.0, 0, 0], (n, 1))
    assert surface_specularity(make_scan(xyz, np.full(n, 3.0))) == 0.0
    xyz = np.tile([1.0, 0, 0], (100, 1))
    assert surface_specularity(make_scan(xyz, [100.0] + [1.0] * 99)) == pytest.approx(17.011469235902933, abs=1e-9)


intensities = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=40)


@given(intensities, st.floats(1e-3, 1e3))
def test_specularity_scale_invariant(vals, c):
    assert abs(specularity_db(np.array(vals) * c) - specularity_db(vals)) < 1e-9


@given(intensities, st.floats(1e-12, 1e-3))
def test_mmr_identities(vals, eps):
    scan = make_scan(np.tile([1.0, 0.2, 0.1], (len(vals), 1)), vals)
    f = patch_features(np.arange(len(vals)), scan, eps)
    assert 0 <= f.log_linear_mean <= f.log_linear_max
    assert f.max_to_mean_ratio >= f.log_linear_max / (f.log_linear_max + eps) * (1 - 1e-15)
    assert f.max_to_mean_ratio * (f.log_linear_mean + eps) == pytest.approx(f.log_linear_max, rel=1e-15)


@given(intensities, st.lists(st.floats(0, 10), min_size=40, max_size=40))
def test_log_features_monotone(vals, bumps):
    vals = np.array(vals)
    xyz = np.tile([1.0, 0, 0], (len(vals), 1))
    lo = patch_features(np.arange(len(vals)), make_scan(xyz, vals))
    hi = patch_features(np.arange(len(vals)), make_scan(xyz, vals + np.array(bumps[:len(vals)])))
    assert hi.log_linear_max >= lo.log_linear_max
    assert hi.log_linear_mean >= lo.log_linear_mean - 1e-15
