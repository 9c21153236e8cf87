import numpy as np
import pytest

from mcnm.data import Dataset, load_dataset, observation_views, write_dataset
from mcnm.errors import ParseError, ValidationError


def test_from_array_marks_nan_missing():
    ds = Dataset.from_array([[1.0, np.nan], [2.0, 3.0]])
    assert ds.n == 2 and ds.d == 2
    assert ds.mask.tolist() == [[True, False], [True, True]]
    assert ds.columns == ("x1", "x2")
    assert not ds.fully_observed


def test_dataset_is_read_only():
    ds = Dataset.from_array([[1.0, 2.0]])
    with pytest.raises(ValueError):
        ds.values[0, 0] = 5.0


def test_validation_errors():
    with pytest.raises(ValidationError):
        Dataset.from_array([[np.nan, np.nan], [1.0, 2.0]])
    with pytest.raises(ValidationError):
        Dataset(np.zeros((0, 2)), np.zeros((0, 2), dtype=bool))
    with pytest.raises(ValidationError):
        Dataset(np.zeros((2, 2)), np.ones((2, 3), dtype=bool))
    with pytest.raises(ValidationError):
        Dataset(np.array([[np.inf, 1.0]]), np.ones((1, 2), dtype=bool))


def test_patterns_grouped_in_first_occurrence_order():
    ds = Dataset.from_array([[1, np.nan], [1, 2], [np.nan, 3], [4, np.nan], [5, 6]])
    pats = ds.patterns()
    assert [p.tolist() for p, _ in pats] == [[True, False], [True, True], [False, True]]
    assert [r.tolist() for _, r in pats] == [[0, 3], [1, 4], [2]]


def test_observation_views():
    ds = Dataset.from_array([[1, np.nan, 2]])
    (view,) = observation_views(ds)
    assert view.observed_idx == (0, 2) and view.missing_idx == (1,) and view.d_obs == 2


def test_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 3))
    x[rng.random((20, 3)) < 0.2] = np.nan
    x[np.isnan(x).all(axis=1), 0] = 1.0
    ds = Dataset.from_array(x, columns=("a", "b", "c"))
    write_dataset(ds, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.mask, ds.mask)
    np.testing.assert_array_equal(back.values[ds.mask], ds.values[ds.mask])
    assert back.columns == ("a", "b", "c")


def test_tab_delimited_and_empty_cells(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("u\tv\n1\t\n2\t3\n\n")
    ds = load_dataset(p)
    assert ds.mask.tolist() == [[True, False], [True, True]]


def test_parse_error_reports_cell(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as info:
        load_dataset(p)
    assert (info.value.row, info.value.column) == (2, 2)
    p.write_text("a,b\n1,2,3\n")
    with pytest.raises(ParseError):
        load_dataset(p)
    p.write_text("a,b\nNA,NA\n")
    with pytest.raises(ValidationError):
        load_dataset(p)
