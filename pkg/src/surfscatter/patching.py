"""Plane fitting and fixed-size square binning of surface scans."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud_io import Dataset, SurfaceScan
from .errors import DegenerateCloud, SurfScatterError

DEFAULT_BIN_SIZE = 0.03
DEFAULT_MIN_POINTS = 5

# relative singular-value gap below which two principal axes count as tied
_AXIS_TIE_RTOL = 1e-6
# absorbs rounding when a point sits exactly on a bin edge
_EDGE_SNAP = 1e-9


@dataclass(frozen=True)
class SurfacePlane:
    centroid: np.ndarray
    basis_u: np.ndarray
    basis_v: np.ndarray
    normal: np.ndarray

    def to_plane(self, xyz) -> np.ndarray:
        """(n, 3) sensor-frame points -> (n, 2) in-plane (u, v) relative to the centroid."""
        d = np.asarray(xyz, dtype=float) - self.centroid
        return np.column_stack([d @ self.basis_u, d @ self.basis_v])

    def from_plane(self, uv) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        return self.centroid + uv[:, :1] * self.basis_u + uv[:, 1:2] * self.basis_v

    def residuals(self, xyz) -> np.ndarray:
        return (np.asarray(xyz, dtype=float) - self.centroid) @ self.normal


def _positive_major(v: np.ndarray) -> np.ndarray:
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def fit_surface_plane(xyz) -> SurfacePlane:
    """Least-squares plane through ``xyz`` by principal-axis decomposition.

    ``normal`` is the least-variance axis, oriented toward the sensor origin
    when that is defined. ``basis_u`` is the greatest-variance axis with its
    largest-magnitude component positive (``basis_v`` likewise); when the two in-plane variances
    tie, the world axis with the largest in-plane projection is used instead
    so square clouds still get an axis-aligned grid.
    """
    pts = np.asarray(xyz, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateCloud(f"need at least 3 points to fit a plane, got {len(pts)}")
    centroid = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    if s[0] == 0 or s[1] <= 1e-10 * s[0]:
        raise DegenerateCloud("points are coincident or collinear")

    normal = vt[2]
    toward = -normal @ centroid
    if abs(toward) > 1e-12 * max(1.0, np.linalg.norm(centroid)):
        normal = normal if toward > 0 else -normal
    else:
        normal = _positive_major(normal)

    if (s[0] - s[1]) <= _AXIS_TIE_RTOL * s[0]:
        proj = np.eye(3) - np.outer(normal, normal)
        lengths = np.linalg.norm(proj, axis=1)
        j = int(np.argmax(lengths > lengths.max() - 1e-12))
        basis_u = proj[j] / lengths[j]
    else:
        basis_u = vt[0]
    basis_u = _positive_major(basis_u / np.linalg.norm(basis_u))
    # sign-fixed independently of the normal so the grid never mirrors
    basis_v = np.cross(normal, basis_u)
    basis_v = _positive_major(basis_v / np.linalg.norm(basis_v))
    return SurfacePlane(centroid, basis_u, basis_v, normal)


@dataclass(frozen=True)
class Patch:
    grid_u: int
    grid_v: int
    point_indices: np.ndarray
    center: np.ndarray

    def __len__(self) -> int:
        return len(self.point_indices)


@dataclass(frozen=True)
class PatchGrid:
    material_name: str
    bin_size: float
    patches: tuple[Patch, ...]
    discarded_count: int
    n_points: int
    plane: SurfacePlane | None = None

    def __len__(self) -> int:
        return len(self.patches)

    def membership(self) -> np.ndarray:
        """Patch index per scan point, -1 for points in discarded bins."""
        out = np.full(self.n_points, -1, dtype=np.int64)
        for k, p in enumerate(self.patches):
            out[p.point_indices] = k
        return out


def partition_into_patches(scan: SurfaceScan, bin_size: float = DEFAULT_BIN_SIZE,
                           min_points: int = DEFAULT_MIN_POINTS) -> PatchGrid:
    """Bin ``scan`` into ``bin_size`` squares on its fitted plane.

    Bin (i, j) covers ``[i*s, (i+1)*s) x [j*s, (j+1)*s)`` measured from the
    lower-left corner of the cloud's in-plane bounding box. Bins holding fewer
    than ``min_points`` points are dropped; ``discarded_count`` counts the
    dropped bins.
    """
    if not bin_size > 0:
        raise SurfScatterError(f"bin_size must be positive, got {bin_size}")
    if min_points < 1:
        raise SurfScatterError(f"min_points must be >= 1, got {min_points}")
    xyz = scan.xyz
    n = len(xyz)
    if n == 0:
        return PatchGrid(scan.material_name, bin_size, (), 0, 0)

    if n < 3 and np.all(xyz == xyz[0]):
        # coincident points: nothing to fit, they share a single bin
        plane = SurfacePlane(xyz[0].copy(), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))
    else:
        plane = fit_surface_plane(xyz)

    uv = plane.to_plane(xyz)
    origin = uv.min(axis=0)
    cells = np.floor((uv - origin) / bin_size + _EDGE_SNAP).astype(np.int64)
    keys, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(counts)])

    patches = []
    discarded = 0
    for k, (iu, iv) in enumerate(keys):
        if counts[k] < min_points:
            discarded += 1
            continue
        idx = order[bounds[k]:bounds[k + 1]]
        idx.setflags(write=False)
        center_uv = origin + (np.array([iu, iv]) + 0.5) * bin_size
        patches.append(Patch(int(iu), int(iv), idx, plane.from_plane(center_uv)[0]))
    return PatchGrid(scan.material_name, bin_size, tuple(patches), discarded, n, plane)


@dataclass(frozen=True)
class CountRow:
    material: str
    points: int
    patches: int


@dataclass(frozen=True)
class CountReport:
    rows: tuple[CountRow, ...]

    @property
    def total_points(self) -> int:
        return sum(r.points for r in self.rows)

    @property
    def total_patches(self) -> int:
        return sum(r.patches for r in self.rows)

    def as_dict(self) -> dict:
        return {
            "rows": [vars(r) for r in self.rows],
            "total": {"points": self.total_points, "patches": self.total_patches},
        }


def patch_count_report(dataset: Dataset, bin_size: float = DEFAULT_BIN_SIZE,
                       min_points: int = DEFAULT_MIN_POINTS, grids: dict | None = None) -> CountReport:
    """Per-material point and patch counts (the dataset accounting table)."""
    rows = []
    for scan in dataset:
        grid = grids[scan.material_name] if grids else partition_into_patches(scan, bin_size, min_points)
        rows.append(CountRow(scan.material_name, len(scan), len(grid)))
    return CountReport(tuple(rows))


def write_count_report_csv(report: CountReport, dest, header_comment: str | None = None) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["material", "points", "patches"])
        for r in report.rows:
            w.writerow([r.material, r.points, r.patches])
        w.writerow(["total", report.total_points, report.total_patches])


def write_patch_dump(grids, dest: Path, header_comment: str | None = None) -> None:
    """CSV of every retained patch: material, grid_u, grid_v, n_points, center_x/y/z."""
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["material", "grid_u", "grid_v", "n_points", "center_x", "center_y", "center_z"])
        for grid in grids:
            for p in grid.patches:
                w.writerow([grid.material_name, p.grid_u, p.grid_v, len(p),
                            *(repr(float(c)) for c in p.center)])
