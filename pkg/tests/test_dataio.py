import os

import numpy as np
import pytest

from hdinfer.dataio import (
    atomic_write,
    dumps_json,
    format_float,
    loads_json,
    matrix_from_csv_text,
    read_matrix_csv,
    read_vector_csv,
    write_matrix_csv,
)
from hdinfer.errors import ValidationError


def test_format_float_round_trips():
    for x in (0.1, -1.0 / 3.0, 1e-300, 12345.678901234567, 2.0 ** -52):
        assert float(format_float(x)) == x
    with pytest.raises(ValidationError):
        format_float(float("nan"))


def test_matrix_round_trip(tmp_path, nprng):
    a = nprng.standard_normal((7, 3))
    path = str(tmp_path / "m.csv")
    write_matrix_csv(path, a)
    b = read_matrix_csv(path)
    assert np.array_equal(a, b)
    first = open(path).readline().strip()
    assert first == "7,3"


def test_vector_round_trip_and_comments(tmp_path):
    path = str(tmp_path / "v.csv")
    write_matrix_csv(path, np.array([1.5, -2.0, 0.25]), header_comment="note")
    v = read_vector_csv(path)
    assert np.array_equal(v, [1.5, -2.0, 0.25])
    assert open(path).readline().startswith("# note")


def test_malformed_rows_name_the_line():
    text = "2,3\n1,2,3\n4,5\n"
    with pytest.raises(ValidationError) as err:
        matrix_from_csv_text(text, origin="bad.csv")
    assert "line 3" in str(err.value)


def test_row_count_mismatch_detected():
    with pytest.raises(ValidationError):
        matrix_from_csv_text("3,2\n1,2\n3,4\n")
    with pytest.raises(ValidationError):
        matrix_from_csv_text("1,2\n1,2\n3,4\n")


def test_non_numeric_and_empty_rejected():
    with pytest.raises(ValidationError):
        matrix_from_csv_text("1,1\nabc\n")
    with pytest.raises(ValidationError):
        matrix_from_csv_text("")


def test_json_round_trip_byte_identical():
    doc = {
        "b_hat": [0.1, -2.5e-8, 3.0],
        "alpha": 0.05,
        "variance_mode": "sandwich",
        "diagnostics": {"d1_stat": 1.0 / 3.0, "flag": True, "note": None},
        "counts": [1, 2, 3],
    }
    text = dumps_json(doc)
    again = dumps_json(loads_json(text))
    assert text == again


def test_atomic_write_replaces_and_cleans_up(tmp_path):
    path = str(tmp_path / "out.txt")
    atomic_write(path, "one\n")
    atomic_write(path, "two\n")
    assert open(path).read() == "two\n"
    leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]
    assert leftovers == []
