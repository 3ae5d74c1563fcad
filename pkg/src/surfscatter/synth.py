"""Rayleigh roughness physics and a synthetic labeled-scan generator.

The generator places a flat panel facing the sensor (normal along -x) at a
given standoff and splits each return into two parts:

* a coherent part ``base * rho_s(h_rms, theta) * exp(-(theta/lobe)^2 / 2)``
  that only comes back near normal incidence, and
* an incoherent part ``base * (1 - rho_s(h_rms, theta)) * cos(theta)``
  scattered diffusely (Lambertian).

A constant ``diffuse_floor`` and Gaussian noise are added and the result is
clamped at zero. Smooth panels therefore show one sharp peak around the
boresight over a dark background (high peak-to-mean ratio), while rough
panels return a broad, nearly uniform level. The boresight point gets the
whole ``base`` (coherent + incoherent) regardless of roughness. This model
is only meant as a test oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .cloud_io import IntensityMode, SurfaceClass, SurfaceScan, class_tag, write_point_csv
from .errors import AllZeroIntensities, GrazingIncidence, InvalidSpec
from .features import DEFAULT_THRESHOLD_DB, assign_class, specularity_db

LIDAR_WAVELENGTH = 905e-9
TRIPOD_STANDOFF = 44 * 0.0254


@dataclass(frozen=True)
class WaveSpec:
    wavelength: float
    incidence_angle: float = 0.0

    def __post_init__(self):
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise InvalidSpec(f"wavelength must be positive, got {self.wavelength}")
        if not (math.isfinite(self.incidence_angle) and self.incidence_angle >= 0):
            raise InvalidSpec(f"incidence angle must be in [0, pi/2), got {self.incidence_angle}")


@dataclass(frozen=True)
class RoughnessSpec:
    h_rms: float

    def __post_init__(self):
        if not (math.isfinite(self.h_rms) and self.h_rms >= 0):
            raise InvalidSpec(f"h_rms must be finite and >= 0, got {self.h_rms}")


def _cos_incidence(theta):
    if np.any(np.asarray(theta) >= math.pi / 2):
        raise GrazingIncidence("incidence angle must be below pi/2")
    return np.cos(theta)


def rayleigh_threshold(wave: WaveSpec) -> float:
    """Critical rms height ``lambda / (8 cos theta_i)``."""
    return wave.wavelength / (8.0 * float(_cos_incidence(wave.incidence_angle)))


def scattering_factor_array(h_rms, theta, wavelength):
    """Vectorized ``exp(-8 (pi h cos(theta) / lambda)^2)``."""
    arg = math.pi * np.asarray(h_rms, dtype=float) * np.cos(theta) / wavelength
    return np.exp(-8.0 * arg * arg)


def scattering_factor(rough: RoughnessSpec, wave: WaveSpec) -> float:
    if wave.incidence_angle >= math.pi / 2:
        raise GrazingIncidence("incidence angle must be below pi/2")
    return float(scattering_factor_array(rough.h_rms, wave.incidence_angle, wave.wavelength))


def is_rough(rough: RoughnessSpec, wave: WaveSpec) -> bool:
    return rough.h_rms > rayleigh_threshold(wave)


@dataclass(frozen=True)
class SyntheticSurfaceSpec:
    width: float = 0.60
    height: float = 0.30
    point_spacing: float = 0.01
    base_reflectivity: float = 1.0
    h_rms: float = 0.0
    diffuse_floor: float = 0.02
    noise_std: float = 0.005
    standoff: float = TRIPOD_STANDOFF
    wavelength: float = LIDAR_WAVELENGTH
    specular_lobe_deg: float = 0.5
    seed: int = 0
    material_name: str = "synthetic"

    def __post_init__(self):
        for name in ("width", "height", "point_spacing", "standoff", "wavelength", "specular_lobe_deg"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidSpec(f"{name} must be a positive number, got {v!r}")
        for name in ("base_reflectivity", "h_rms", "diffuse_floor", "noise_std"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise InvalidSpec(f"{name} must be a finite number >= 0, got {v!r}")
        if self.point_spacing > min(self.width, self.height):
            raise InvalidSpec("point_spacing larger than the panel")
        if not self.material_name:
            raise InvalidSpec("material_name must be nonempty")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSurfaceSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown synthetic spec fields {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None

    def critical_height(self) -> float:
        """Rayleigh threshold at normal incidence for this spec's wavelength."""
        return rayleigh_threshold(WaveSpec(self.wavelength, 0.0))


def _axis(extent, spacing):
    n = int(round(extent / spacing / 2))
    return np.arange(-n, n + 1) * spacing


def _geometry(spec: SyntheticSurfaceSpec):
    ys, zs = _axis(spec.width, spec.point_spacing), _axis(spec.height, spec.point_spacing)
    yy, zz = np.meshgrid(ys, zs, indexing="xy")
    y, z = yy.ravel(), zz.ravel()
    theta = np.arctan(np.hypot(y, z) / spec.standoff)
    return y, z, theta


def expected_intensity(spec: SyntheticSurfaceSpec, theta) -> np.ndarray:
    """Noise-free return per point at incidence ``theta`` (radians)."""
    rho = scattering_factor_array(spec.h_rms, theta, spec.wavelength)
    lobe = np.exp(-0.5 * (theta / math.radians(spec.specular_lobe_deg)) ** 2)
    return spec.base_reflectivity * (rho * lobe + (1.0 - rho) * np.cos(theta)) + spec.diffuse_floor


def true_class(spec: SyntheticSurfaceSpec, threshold: float = DEFAULT_THRESHOLD_DB) -> SurfaceClass:
    """Class of the noise-free intensity field under the dB threshold."""
    _, _, theta = _geometry(spec)
    try:
        return assign_class(specularity_db(expected_intensity(spec, theta)), threshold)
    except AllZeroIntensities:
        return SurfaceClass.LOW_SPECULAR


def generate_scan(spec: SyntheticSurfaceSpec, threshold: float = DEFAULT_THRESHOLD_DB) -> SurfaceScan:
    """Deterministic synthetic scan for ``spec`` (same seed -> same cloud)."""
    rng = np.random.default_rng(spec.seed)
    y, z, theta = _geometry(spec)
    x = spec.standoff + rng.normal(0.0, spec.h_rms, size=len(y)) if spec.h_rms > 0 else np.full(len(y), spec.standoff)
    intensity = expected_intensity(spec, theta)
    if spec.noise_std > 0:
        intensity = intensity + rng.normal(0.0, spec.noise_std, size=len(y))
    intensity = np.maximum(intensity, 0.0)
    return SurfaceScan(
        material_name=spec.material_name,
        canonical_class=true_class(spec, threshold),
        xyz=np.column_stack([x, y, z]),
        intensity_raw=intensity,
        intensity_linear=intensity.copy(),
        intensity_mode=IntensityMode.IDENTITY,
    )


def write_synthetic(spec: SyntheticSurfaceSpec, csv_path, sidecar_path=None, threshold=DEFAULT_THRESHOLD_DB):
    """Write the scan CSV plus a JSON sidecar with the spec echo and true class."""
    scan = generate_scan(spec, threshold)
    csv_path = Path(csv_path)
    write_point_csv(scan, csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".json")
    sidecar = {
        "spec": asdict(spec),
        "class": class_tag(scan.canonical_class),
        "threshold_db": threshold,
        "n_points": len(scan),
        "critical_height": spec.critical_height(),
        "csv": csv_path.name,
    }
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return scan, sidecar
