import numpy as np
import pandas as pd
import pytest

from nngp.data import (
    Dataset,
    atoms_frame,
    load_dataset,
    load_points,
    parse_atoms,
    parse_dataset,
    parse_numeric_csv,
)
from nngp.exceptions import DataError, DimensionMismatchError
from nngp.utils.files import write_csv


def test_parse_single_output_dataset():
    data = parse_dataset("x0,x1,y\n1,2,3\n4,5,6\n", d_in=2)
    np.testing.assert_array_equal(data.X, [[1, 2], [4, 5]])
    np.testing.assert_array_equal(data.y, [3, 6])
    assert (data.n_samples, data.d_in, data.d_out) == (2, 2, 1)
    assert data.targets.shape == (2, 1)


def test_parse_multi_output_dataset():
    data = parse_dataset("x0,y0,y1\n0.5,1,2\n1.5,3,4\n")
    assert data.y.shape == (2, 2)
    assert data.d_out == 2
    assert list(data.to_frame().columns) == ["x0", "y0", "y1"]


def test_source_text_is_kept_verbatim():
    text = "x0,y\n1.0000000000000002,3\n"
    assert parse_dataset(text).source_text == text


def test_non_numeric_cell_reports_its_line():
    with pytest.raises(DataError) as exc:
        parse_numeric_csv("x0,y\n1,2\n3,abc\n5,6\n")
    assert exc.value.line == 3
    assert "abc" in str(exc.value)


def test_non_finite_cell_is_rejected():
    with pytest.raises(DataError) as exc:
        parse_numeric_csv("x0,y\n1,inf\n")
    assert exc.value.line == 2


def test_ragged_row_reports_its_line():
    with pytest.raises(DataError) as exc:
        parse_numeric_csv("x0,y\n1,2\n3,4,5\n")
    assert exc.value.line == 3


def test_short_row_reports_its_line():
    with pytest.raises(DataError) as exc:
        parse_numeric_csv("x0,y\n1,2\n3\n")
    assert exc.value.line == 3


def test_empty_payload_has_no_header():
    with pytest.raises(DataError) as exc:
        parse_numeric_csv("")
    assert exc.value.line == 1


@pytest.mark.parametrize("text", [
    "x1,y\n1,2\n",
    "x0,z\n1,2\n",
    "y,x0\n1,2\n",
    "x0,y0,y2\n1,2,3\n",
])
def test_column_layout_is_enforced(text):
    with pytest.raises(DataError) as exc:
        parse_dataset(text)
    assert exc.value.line == 1


def test_input_dimension_is_checked():
    with pytest.raises(DimensionMismatchError):
        parse_dataset("x0,y\n1,2\n", d_in=2)


def test_dataset_validates_shapes():
    with pytest.raises(DimensionMismatchError):
        Dataset(np.ones((3, 2)), np.ones(4))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.ones(1))
    with pytest.raises(ValueError):
        Dataset(np.ones((1, 1)), np.array([np.inf]))


def test_files_load_and_points_ignore_targets(tmp_path):
    path = tmp_path / "train.csv"
    path.write_text("x0,x1,y\n1,2,3\n")
    assert load_dataset(path).n_samples == 1
    np.testing.assert_array_equal(load_points(path, d_in=2), [[1, 2]])


def test_missing_file_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        load_points(tmp_path / "absent.csv")


def test_atoms_parse_and_render():
    W, b, p = parse_atoms("w0,w1,b,weight\n0.5,0.25,0.25,1\n", d_in=2)
    np.testing.assert_array_equal(W, [[0.5, 0.25]])
    df = atoms_frame(W, b, p)
    assert list(df.columns) == ["w0", "w1", "b", "weight"]
    with pytest.raises(DataError):
        parse_atoms("w0,b\n1,2\n", d_in=1)


def test_written_doubles_read_back_bit_exact(tmp_path, rng):
    values = rng.standard_normal((5000, 2)) * np.exp(rng.uniform(-300.0, 300.0, size=(5000, 2)))
    values[:6, 0] = [5e-324, 2.2250738585072014e-308, 1.7976931348623157e308, 0.1, 1.0 / 3.0, -0.0]
    path = write_csv(pd.DataFrame(values, columns=["a", "b"]), tmp_path / "values.csv")
    back = parse_numeric_csv(path.read_text(encoding="utf-8")).to_numpy()
    assert back.dtype == np.float64
    assert np.array_equal(np.ascontiguousarray(back).view(np.uint64), np.ascontiguousarray(values).view(np.uint64))


def test_padded_cells_parse_and_underscores_do_not():
    df = parse_numeric_csv("a, b\n 1.5 , -2e3\n")
    assert list(df.columns) == ["a", "b"]
    np.testing.assert_array_equal(df.to_numpy(), [[1.5, -2000.0]])
    with pytest.raises(DataError) as exc:
        parse_numeric_csv("a\n1_000\n")
    assert exc.value.line == 2
