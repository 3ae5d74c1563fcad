import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfscatter.cloud_io import (
    ColumnSchema,
    IntensityMode,
    SurfaceClass,
    linearize_intensity,
    load_dataset,
    parse_manifest,
    parse_point_csv,
    read_manifest,
    write_point_csv,
)
from surfscatter.errors import (
    DatasetLoadError,
    DuplicateMaterial,
    EmptyCloud,
    MalformedRow,
    ManifestError,
    MissingColumn,
    NegativeIntensity,
)


def test_three_row_identity():
    data = b"x,y,z,intensity\n1,0,0,10\n1,0,0,10\n1,0,0,10\n"
    scan = parse_point_csv(io.BytesIO(data), intensity_mode=IntensityMode.IDENTITY)
    assert len(scan) == 3
    assert np.all(scan.intensity_linear == 10)
    assert scan.point(0).x == 1.0


def test_header_only_is_empty():
    with pytest.raises(EmptyCloud):
        parse_point_csv(b"x,y,z,intensity\n")


def test_missing_column():
    with pytest.raises(MissingColumn):
        parse_point_csv(b"x,y,z\n1,2,3\n")


@pytest.mark.parametrize("row", ["1,2,abc,4", "1,2,nan,4", "1,inf,3,4", "1,2,3"])
def test_malformed_rows_report_line(row):
    with pytest.raises(MalformedRow) as err:
        parse_point_csv(f"x,y,z,intensity\n1,2,3,4\n{row}\n".encode())
    assert err.value.row_number == 3


def test_cloudcompare_header_and_custom_schema():
    data = "//X,Y,Z,Intensity,Ring\n1.5,2,3,7,4\n".encode()
    scan = parse_point_csv(data, ColumnSchema(ring="Ring"))
    assert scan.xyz.tolist() == [[1.5, 2.0, 3.0]]
    assert scan.ring.tolist() == [4]

    renamed = b"px,py,pz,refl\n1,2,3,4\n"
    scan = parse_point_csv(renamed, ColumnSchema("px", "py", "pz", "refl"))
    assert scan.intensity_raw[0] == 4


def test_ring_out_of_range():
    with pytest.raises(MalformedRow):
        parse_point_csv(b"x,y,z,intensity,ring\n1,2,3,4,8\n", ColumnSchema(ring="ring"))


def test_linearize_values():
    assert linearize_intensity(0, IntensityMode.DB_TO_LINEAR) == 1.0
    assert linearize_intensity(10, IntensityMode.DB_TO_LINEAR) == pytest.approx(10 ** (10 / 10), rel=1e-15)
    assert linearize_intensity(7.3, IntensityMode.IDENTITY) == 7.3
    with pytest.raises(NegativeIntensity):
        linearize_intensity(-1)


@given(st.floats(0, 100), st.floats(0, 100))
def test_db_linearization_strictly_increasing(a, b):
    la, lb = linearize_intensity(a, "db"), linearize_intensity(b, "db")
    if a < b:
        assert la < lb or np.isclose(a, b, rtol=0, atol=1e-14)


finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, finite, st.floats(0, 1e4)), min_size=1, max_size=30))
def test_csv_round_trip_bit_exact(rows):
    text = "x,y,z,intensity\n" + "\n".join(",".join(repr(v) for v in r) for r in rows)
    scan = parse_point_csv(text.encode())
    buf = io.StringIO()
    write_point_csv(scan, buf)
    again = parse_point_csv(buf.getvalue().encode())
    assert np.array_equal(scan.xyz, again.xyz)
    assert np.array_equal(scan.intensity_raw, again.intensity_raw)
    assert np.array_equal(scan.intensity_linear, again.intensity_linear)


def _write(tmp_path, name, rows):
    p = tmp_path / f"{name}.csv"
    p.write_text("x,y,z,intensity\n" + "\n".join(rows) + "\n")
    return p


def test_load_dataset_totals(tmp_path):
    _write(tmp_path, "a", ["1,0,0,1"] * 3)
    _write(tmp_path, "b", ["1,0,1,2"] * 5)
    manifest = [
        {"material": "a", "path": "a.csv", "class": "semi"},
        {"material": "b", "path": "b.csv", "class": "low", "intensity_mode": "db"},
    ]
    (tmp_path / "m.json").write_text(json.dumps(manifest))
    ds = load_dataset(read_manifest(tmp_path / "m.json"))
    assert ds.total_points == 8 == sum(len(s) for s in ds)
    assert ds["a"].canonical_class is SurfaceClass.SEMI_SPECULAR
    assert ds["b"].intensity_linear[0] == pytest.approx(10 ** 0.2)


def test_duplicate_material_rejected(tmp_path):
    with pytest.raises(DuplicateMaterial):
        parse_manifest([{"material": "a", "path": "a.csv", "class": "semi"},
                        {"material": "a", "path": "b.csv", "class": "low"}], tmp_path)


def test_manifest_field_validation(tmp_path):
    with pytest.raises(ManifestError):
        parse_manifest([{"material": "a", "path": "a.csv", "class": "shiny"}], tmp_path)
    with pytest.raises(ManifestError):
        parse_manifest([{"material": "a", "path": "a.csv", "class": "low", "colour": 1}], tmp_path)
    with pytest.raises(ManifestError):
        parse_manifest([{"material": "a", "path": "a.csv", "class": "low"},
                        {"material": "b", "path": "a.csv", "class": "low"}], tmp_path)


def test_load_errors_are_aggregated(tmp_path):
    _write(tmp_path, "good", ["1,0,0,1"])
    (tmp_path / "bad.csv").write_text("x,y,z,intensity\n")
    m = parse_manifest([
        {"material": "good", "path": "good.csv", "class": "low"},
        {"material": "bad", "path": "bad.csv", "class": "low"},
        {"material": "gone", "path": "missing.csv", "class": "semi"},
    ], tmp_path)
    with pytest.raises(DatasetLoadError) as err:
        load_dataset(m)
    assert len(err.value.failures) == 2
    assert any("bad.csv" in k for k in err.value.failures)
    assert any("missing.csv" in k for k in err.value.failures)
