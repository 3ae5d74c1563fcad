"""Point-cloud CSV ingestion, intensity linearization and dataset manifests."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    DatasetLoadError,
    DuplicateMaterial,
    EmptyCloud,
    MalformedRow,
    ManifestError,
    MissingColumn,
    NegativeIntensity,
    SurfScatterError,
)

N_RINGS = 8


class SurfaceClass(enum.IntEnum):
    """Two-class label. The integer value is the class index used by models."""

    LOW_SPECULAR = 0
    SEMI_SPECULAR = 1

    @property
    def short(self) -> str:
        return "low" if self is SurfaceClass.LOW_SPECULAR else "semi"


_CLASS_BY_TAG = {"low": SurfaceClass.LOW_SPECULAR, "semi": SurfaceClass.SEMI_SPECULAR, "unlabeled": None}


def class_tag(cls: SurfaceClass | None) -> str:
    return "unlabeled" if cls is None else cls.short


def parse_class_tag(tag: str) -> SurfaceClass | None:
    try:
        return _CLASS_BY_TAG[str(tag).strip().lower()]
    except KeyError:
        raise ManifestError(f"unknown class {tag!r}; expected one of semi, low, unlabeled") from None


class IntensityMode(enum.Enum):
    IDENTITY = "identity"
    DB_TO_LINEAR = "db"


# Ground-truth classes of the 15 surfaces in the public surface dataset.
REFERENCE_SURFACE_CLASSES: dict[str, SurfaceClass] = {
    "metal_copper": SurfaceClass.SEMI_SPECULAR,
    "metal_tin": SurfaceClass.SEMI_SPECULAR,
    "whiteboard": SurfaceClass.SEMI_SPECULAR,
    "projector_screen": SurfaceClass.LOW_SPECULAR,
    "tv": SurfaceClass.SEMI_SPECULAR,
    "linoleum": SurfaceClass.SEMI_SPECULAR,
    "smooth_wood": SurfaceClass.LOW_SPECULAR,
    "rough_wood": SurfaceClass.LOW_SPECULAR,
    "drywall": SurfaceClass.LOW_SPECULAR,
    "cardboard": SurfaceClass.LOW_SPECULAR,
    "corkboard": SurfaceClass.LOW_SPECULAR,
    "styrofoam": SurfaceClass.LOW_SPECULAR,
    "concrete_wall": SurfaceClass.LOW_SPECULAR,
    "fabric_pinboard": SurfaceClass.LOW_SPECULAR,
    "carpet": SurfaceClass.LOW_SPECULAR,
}


def linearize_intensity(raw, mode: IntensityMode = IntensityMode.IDENTITY):
    """Map raw sensor intensity to linear reflectance units.

    Works on scalars and arrays. ``DB_TO_LINEAR`` treats the raw value as a
    decibel reading and returns ``10 ** (raw / 10)``.
    """
    arr = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NegativeIntensity("intensity must be finite")
    if np.any(arr < 0):
        raise NegativeIntensity(f"negative intensity {arr.min()!r}")
    mode = IntensityMode(mode)
    if mode is IntensityMode.IDENTITY:
        out = arr.copy()
    else:
        out = np.power(10.0, arr / 10.0)
    return float(out) if out.ndim == 0 else out


class LidarPoint(NamedTuple):
    x: float
    y: float
    z: float
    intensity_raw: float
    intensity_linear: float
    ring: int | None = None


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurfaceScan:
    """A named material's full cloud, stored column-wise.

    ``xyz`` is ``(n, 3)`` in the sensor frame (meters). Arrays are read-only.
    """

    material_name: str
    canonical_class: SurfaceClass | None
    xyz: np.ndarray
    intensity_raw: np.ndarray
    intensity_linear: np.ndarray
    ring: np.ndarray | None = None
    intensity_mode: IntensityMode = IntensityMode.IDENTITY

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=float).reshape(-1, 3)
        raw = np.array(self.intensity_raw, dtype=float).reshape(-1)
        lin = np.array(self.intensity_linear, dtype=float).reshape(-1)
        if not (len(xyz) == len(raw) == len(lin)):
            raise ValueError("xyz / intensity lengths differ")
        if not np.all(np.isfinite(xyz)):
            raise ValueError("non-finite coordinates")
        if np.any(raw < 0) or np.any(lin < 0):
            raise NegativeIntensity("negative intensity in scan")
        object.__setattr__(self, "xyz", _frozen(xyz))
        object.__setattr__(self, "intensity_raw", _frozen(raw))
        object.__setattr__(self, "intensity_linear", _frozen(lin))
        if self.ring is not None:
            ring = np.array(self.ring, dtype=np.int64).reshape(-1)
            if len(ring) != len(xyz):
                raise ValueError("ring length differs from point count")
            if np.any((ring < 0) | (ring >= N_RINGS)):
                raise ValueError(f"ring index outside [0, {N_RINGS - 1}]")
            object.__setattr__(self, "ring", _frozen(ring))

    def __len__(self) -> int:
        return len(self.xyz)

    def point(self, i: int) -> LidarPoint:
        x, y, z = (float(v) for v in self.xyz[i])
        ring = None if self.ring is None else int(self.ring[i])
        return LidarPoint(x, y, z, float(self.intensity_raw[i]), float(self.intensity_linear[i]), ring)

    def points(self) -> list[LidarPoint]:
        return [self.point(i) for i in range(len(self))]

    @classmethod
    def from_points(cls, material_name, points: Iterable, canonical_class=None,
                    intensity_mode=IntensityMode.IDENTITY) -> "SurfaceScan":
        pts = list(points)
        rings = [p.ring for p in pts]
        ring = None if any(r is None for r in rings) or not pts else rings
        return cls(
            material_name,
            canonical_class,
            np.array([[p.x, p.y, p.z] for p in pts], dtype=float).reshape(-1, 3),
            np.array([p.intensity_raw for p in pts], dtype=float),
            np.array([p.intensity_linear for p in pts], dtype=float),
            ring,
            intensity_mode,
        )


@dataclass(frozen=True)
class ColumnSchema:
    """Names of the CSV columns holding each field.

    Header matching ignores case and a leading ``//`` (CloudCompare writes
    ``//X`` as its first header cell).
    """

    x: str = "x"
    y: str = "y"
    z: str = "z"
    intensity: str = "intensity"
    ring: str | None = None

    @classmethod
    def from_dict(cls, d: dict | None) -> "ColumnSchema":
        if not d:
            return cls()
        unknown = set(d) - {"x", "y", "z", "intensity", "ring"}
        if unknown:
            raise ManifestError(f"unknown column mapping keys {sorted(unknown)}")
        return cls(**d)


def _norm_header(name: str) -> str:
    name = name.strip().lstrip("\ufeff")
    if name.startswith("//"):
        name = name[2:]
    return name.strip().lower()


def parse_point_csv(
    stream,
    schema: ColumnSchema = ColumnSchema(),
    intensity_mode: IntensityMode = IntensityMode.IDENTITY,
    material_name: str = "",
    canonical_class: SurfaceClass | None = None,
) -> SurfaceScan:
    """Parse a CSV stream (bytes or text) into a :class:`SurfaceScan`.

    Lines starting with ``#`` are ignored. Row numbers in errors are 1-based
    line numbers of the file, header included.
    """
    intensity_mode = IntensityMode(intensity_mode)
    data = stream.read() if hasattr(stream, "read") else stream
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8-sig")

    reader = csv.reader(io.StringIO(data, newline=""))
    header = None
    for row in reader:
        if not row or row[0].lstrip().startswith("#"):
            continue
        header = row
        break
    if header is None:
        raise EmptyCloud("no header row")

    index = {_norm_header(h): i for i, h in enumerate(header)}
    wanted = [("x", schema.x), ("y", schema.y), ("z", schema.z), ("intensity", schema.intensity)]
    if schema.ring is not None:
        wanted.append(("ring", schema.ring))
    cols = {}
    for key, name in wanted:
        pos = index.get(_norm_header(name))
        if pos is None:
            raise MissingColumn(f"column {name!r} not found in header {header}")
        cols[key] = pos

    values: list[tuple] = []
    rings: list[int] = []
    need = max(cols.values())
    for row in reader:
        line_no = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()) or row[0].lstrip().startswith("#"):
            continue
        if len(row) <= need:
            raise MalformedRow(line_no, f"expected at least {need + 1} fields, got {len(row)}")
        try:
            x, y, z, inten = (float(row[cols[k]]) for k in ("x", "y", "z", "intensity"))
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        if not all(math.isfinite(v) for v in (x, y, z, inten)):
            raise MalformedRow(line_no, "non-finite value")
        if inten < 0:
            raise MalformedRow(line_no, f"negative intensity {inten}")
        if "ring" in cols:
            try:
                ring_f = float(row[cols["ring"]])
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from None
            if not ring_f.is_integer() or not 0 <= ring_f < N_RINGS:
                raise MalformedRow(line_no, f"ring {row[cols['ring']]!r} outside 0..{N_RINGS - 1}")
            rings.append(int(ring_f))
        values.append((x, y, z, inten))

    if not values:
        raise EmptyCloud("CSV has a header but no data rows")
    arr = np.array(values, dtype=float)
    return SurfaceScan(
        material_name=material_name,
        canonical_class=canonical_class,
        xyz=arr[:, :3],
        intensity_raw=arr[:, 3],
        intensity_linear=linearize_intensity(arr[:, 3], intensity_mode),
        ring=rings if "ring" in cols else None,
        intensity_mode=intensity_mode,
    )


def read_point_csv(path, schema: ColumnSchema = ColumnSchema(), intensity_mode=IntensityMode.IDENTITY,
                   material_name: str | None = None, canonical_class=None) -> SurfaceScan:
    path = Path(path)
    with open(path, "rb") as fh:
        return parse_point_csv(fh, schema, intensity_mode,
                               material_name if material_name is not None else path.stem,
                               canonical_class)


def write_point_csv(scan: SurfaceScan, dest) -> None:
    """Write ``scan`` with columns x, y, z, intensity[, ring].

    Floats are written with ``repr`` so re-parsing is bit-exact. The raw
    intensity is written, so the reader must use the scan's intensity mode.
    """
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        header = ["x", "y", "z", "intensity"] + (["ring"] if scan.ring is not None else [])
        w.writerow(header)
        for i in range(len(scan)):
            row = [repr(float(v)) for v in scan.xyz[i]] + [repr(float(scan.intensity_raw[i]))]
            if scan.ring is not None:
                row.append(str(int(scan.ring[i])))
            w.writerow(row)
    finally:
        if own:
            fh.close()


@dataclass(frozen=True)
class ManifestEntry:
    material_name: str
    file_path: Path
    canonical_class: SurfaceClass | None
    intensity_mode: IntensityMode = IntensityMode.IDENTITY


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    schema: ColumnSchema = field(default_factory=ColumnSchema)

    def __post_init__(self):
        names = [e.material_name for e in self.entries]
        for name in names:
            if not name:
                raise ManifestError("empty material name")
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DuplicateMaterial(f"duplicate material names: {dupes}")
        paths = [Path(e.file_path).resolve() for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ManifestError("manifest lists the same file twice")


_ENTRY_KEYS = {"material", "path", "class", "intensity_mode"}


def parse_manifest(data, base_dir=".") -> DatasetManifest:
    """Build a manifest from decoded JSON.

    Accepts either a list of entries or ``{"columns": {...}, "surfaces": [...]}``.
    Relative paths resolve against ``base_dir``.
    """
    schema = ColumnSchema()
    if isinstance(data, dict):
        extra = set(data) - {"columns", "surfaces"}
        if extra:
            raise ManifestError(f"unknown manifest keys {sorted(extra)}")
        schema = ColumnSchema.from_dict(data.get("columns"))
        data = data.get("surfaces", [])
    if not isinstance(data, list):
        raise ManifestError("manifest must be a list of surface entries")
    entries = []
    for i, raw in enumerate(data):
        if not isinstance(raw, dict):
            raise ManifestError(f"entry {i} is not an object")
        missing = {"material", "path", "class"} - set(raw)
        unknown = set(raw) - _ENTRY_KEYS
        if missing or unknown:
            raise ManifestError(f"entry {i}: missing {sorted(missing)}, unknown {sorted(unknown)}")
        try:
            mode = IntensityMode(raw.get("intensity_mode", "identity"))
        except ValueError:
            raise ManifestError(f"entry {i}: intensity_mode must be 'identity' or 'db'") from None
        path = Path(raw["path"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        entries.append(ManifestEntry(str(raw["material"]), path, parse_class_tag(raw["class"]), mode))
    return DatasetManifest(tuple(entries), schema)


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    return parse_manifest(data, base_dir=path.parent)


def manifest_to_json(manifest: DatasetManifest) -> dict:
    return {
        "columns": {k: v for k, v in vars(manifest.schema).items() if v is not None},
        "surfaces": [
            {
                "material": e.material_name,
                "path": str(e.file_path),
                "class": class_tag(e.canonical_class),
                "intensity_mode": e.intensity_mode.value,
            }
            for e in manifest.entries
        ],
    }


def _slug(s: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", s.lower()).strip("_")


def manifest_from_directory(directory, schema: ColumnSchema = ColumnSchema(),
                            intensity_mode=IntensityMode.IDENTITY) -> DatasetManifest:
    """Match CSV files in ``directory`` to the 15 known surfaces by file stem.

    A file matches a surface when its slugified stem equals or contains the
    surface name; the longest surface name wins. Unmatched files are ignored.
    """
    found: dict[str, Path] = {}
    names = sorted(REFERENCE_SURFACE_CLASSES, key=len, reverse=True)
    for path in sorted(Path(directory).rglob("*.csv")):
        stem = _slug(path.stem)
        for name in names:
            if stem == name or name in stem:
                found.setdefault(name, path)
                break
    entries = tuple(
        ManifestEntry(name, found[name], REFERENCE_SURFACE_CLASSES[name], IntensityMode(intensity_mode))
        for name in REFERENCE_SURFACE_CLASSES
        if name in found
    )
    return DatasetManifest(entries, schema)


@dataclass(frozen=True)
class Dataset:
    scans: tuple[SurfaceScan, ...]

    def __post_init__(self):
        names = [s.material_name for s in self.scans]
        if len(set(names)) != len(names):
            raise DuplicateMaterial("duplicate material names in dataset")

    @property
    def total_points(self) -> int:
        return sum(len(s) for s in self.scans)

    @property
    def materials(self) -> list[str]:
        return [s.material_name for s in self.scans]

    def __getitem__(self, name: str) -> SurfaceScan:
        for s in self.scans:
            if s.material_name == name:
                return s
        raise KeyError(name)

    def __iter__(self):
        return iter(self.scans)

    def __len__(self) -> int:
        return len(self.scans)


def load_dataset(manifest: DatasetManifest) -> Dataset:
    """Load every manifest entry; all per-file failures are reported together."""
    scans, failures = [], {}
    for entry in manifest.entries:
        try:
            scans.append(read_point_csv(entry.file_path, manifest.schema, entry.intensity_mode,
                                        entry.material_name, entry.canonical_class))
        except (OSError, SurfScatterError, UnicodeDecodeError) as exc:
            failures[str(entry.file_path)] = exc
    if failures:
        raise DatasetLoadError(failures)
    return Dataset(tuple(scans))
