import numpy as np
import pytest

from mcnm.data import Dataset
from mcnm.errors import ConfigError
from mcnm.simulate import (FAMILIES, AmputationConfig, ScenarioConfig, ampute,
                           default_patterns, generate_scenario)


@pytest.mark.parametrize("family", FAMILIES)
def test_generator_is_reproducible(family):
    cfg = ScenarioConfig(family=family, n=200, seed=4)
    a, b = generate_scenario(cfg), generate_scenario(cfg)
    np.testing.assert_array_equal(a.data.values, b.data.values)
    np.testing.assert_array_equal(a.true_labels, b.true_labels)
    assert a.data.fully_observed
    assert set(np.unique(a.true_labels)) <= {0, 1}


def test_atypical_points_lie_in_distance_band():
    cfg = ScenarioConfig(family="mn_atypical", n=500, seed=1)
    lab = generate_scenario(cfg)
    assert lab.true_outlier.sum() == 5
    means = cfg.means()
    pts = lab.data.values[lab.true_outlier]
    dist = np.linalg.norm(pts[:, None] - means[None], axis=2)
    assert np.all((dist.min(axis=1) >= 8) & (dist.min(axis=1) <= 12))
    np.testing.assert_array_equal(lab.true_labels[lab.true_outlier], dist.argmin(axis=1))


def test_uniform_noise_count_and_box():
    lab = generate_scenario(ScenarioConfig(family="mn_uniform_noise", n=300, seed=2))
    assert lab.true_outlier.sum() == 15
    lo, hi = np.array(lab.true_params["noise_box"])
    pts = lab.data.values[lab.true_outlier]
    assert np.all((pts >= lo) & (pts <= hi))


def test_mcn_bad_share_near_one_minus_alpha():
    lab = generate_scenario(ScenarioConfig(family="mcn", n=20000, seed=3))
    assert lab.true_outlier.mean() == pytest.approx(0.1, abs=0.01)


def test_close_overlap_means():
    np.testing.assert_array_equal(ScenarioConfig(overlap="close").means(), [[0, 0], [3, 3]])
    with pytest.raises(ConfigError):
        ScenarioConfig(family="nope")


def test_default_patterns_two_columns():
    pats, w = default_patterns(2)
    assert pats.shape == (10, 2)
    assert np.all(pats.sum(axis=1) == 1)
    assert np.all(w[pats] == 0)


@pytest.mark.parametrize("prop", [0.1, 0.5, 0.8])
def test_ampute_exact_row_count(prop):
    lab = generate_scenario(ScenarioConfig(family="student_t", n=101, seed=0))
    out = ampute(lab, AmputationConfig(prop, seed=9))
    rows = ~out.data.mask.all(axis=1)
    assert rows.sum() == int(np.floor(prop * 101 + 0.5))
    assert out.data.mask.any(axis=1).all()
    np.testing.assert_array_equal(out.data.values[out.data.mask],
                                  lab.data.values[out.data.mask])


def test_ampute_is_mar_shaped():
    # with positive weights, rows whose kept coordinate is larger go missing more often
    rng = np.random.default_rng(0)
    ds = Dataset.from_array(rng.standard_normal((4000, 2)))
    cfg = AmputationConfig(0.3, patterns=[[True, False]], weights=[[0.0, 1.0]], seed=1)
    out = ampute(ds, cfg)
    hidden = ~out.mask[:, 0]
    assert ds.values[hidden, 1].mean() > ds.values[~hidden, 1].mean() + 0.3


def test_ampute_higher_dimension_and_errors():
    ds = Dataset.from_array(np.random.default_rng(0).standard_normal((50, 5)))
    out = ampute(ds, AmputationConfig(0.5, seed=0))
    assert (~out.mask.all(axis=1)).sum() == 25
    with pytest.raises(ConfigError):
        ampute(out, AmputationConfig(0.5))
    with pytest.raises(ConfigError):
        AmputationConfig(1.0)
    with pytest.raises(ConfigError):
        ampute(ds, AmputationConfig(0.5, patterns=[[True] * 5]))
    with pytest.warns(RuntimeWarning):
        same = ampute(ds, AmputationConfig(0.001))
    assert same is ds
