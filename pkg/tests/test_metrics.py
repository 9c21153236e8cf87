import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcnm.metrics import adjusted_rand_index, mean_sd, outlier_rates

from oracles import ari_by_pairs


def test_ari_identical_and_relabelled():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [5, 5, 2, 2]) == 1.0


def test_ari_known_value():
    # contingency [[2,1],[0,2]]: index 2, rows 4, cols 4, total 10
    a = [0, 0, 0, 1, 1]
    b = [0, 0, 1, 1, 1]
    expected = (2 - 4 * 4 / 10) / (4 - 4 * 4 / 10)
    assert adjusted_rand_index(a, b) == pytest.approx(expected, abs=1e-15)


def test_ari_degenerate_partitions():
    assert adjusted_rand_index([0, 0, 0], [1, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 1, 2], [0, 1, 2]) == 1.0
    assert adjusted_rand_index([0, 0, 0], [0, 1, 2]) == 0.0
    with pytest.raises(ValueError):
        adjusted_rand_index([], [])
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=3, max_size=30))
def test_ari_matches_pair_enumeration(pairs):
    a, b = map(list, zip(*pairs))
    ra, rb = _pair_counts(a), _pair_counts(b)
    if ra == rb == 0 or (ra == rb and ra == len(a) * (len(a) - 1) // 2):
        return  # degenerate, covered above
    try:
        expect = ari_by_pairs(a, b)
    except ZeroDivisionError:
        return
    assert adjusted_rand_index(a, b) == pytest.approx(expect, abs=1e-12)
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(b, a), abs=1e-15)


def _pair_counts(x):
    _, c = np.unique(x, return_counts=True)
    return int(np.sum(c * (c - 1) // 2))


def test_outlier_rates():
    tpr, fpr, c = outlier_rates([1, 0, 1, 0, 0], [1, 1, 0, 0, 0])
    assert (tpr, fpr) == (0.5, 1 / 3)
    assert (c.tp, c.fp, c.tn, c.fn, c.n) == (1, 1, 2, 1, 5)
    tpr, fpr, _ = outlier_rates([0, 1], [0, 0])
    assert tpr is None and fpr == 0.5
    tpr, fpr, _ = outlier_rates([1, 1], [1, 1])
    assert tpr == 1.0 and fpr is None
    with pytest.raises(ValueError):
        outlier_rates([1], [1, 0])


def test_mean_sd():
    assert mean_sd([1.0, None, 3.0, float("nan")]) == (2.0, pytest.approx(np.sqrt(2)))
    assert mean_sd([None]) == (None, None)
    assert mean_sd([4.0]) == (4.0, None)
