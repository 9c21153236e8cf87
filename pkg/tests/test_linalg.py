import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from mcnm.errors import DomainError, SingularCovarianceError
from mcnm.linalg import (cholesky, conditional_normal, log_sum_exp,
                         mcn_log_density, mn_log_density, repair_covariance,
                         squared_mahalanobis)

from oracles import inv2, mcn_pdf, mn_logpdf_2d

SIGMA = np.array([[2.0, 0.6], [0.6, 1.0]])


def spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


def test_mahalanobis_matches_adjugate_inverse():
    x, mu = np.array([1.5, -0.3]), np.array([0.2, 0.4])
    inv, _ = inv2(SIGMA)
    assert squared_mahalanobis(x, mu, SIGMA) == pytest.approx((x - mu) @ inv @ (x - mu), rel=1e-13)


def test_mahalanobis_identity_and_batch():
    assert squared_mahalanobis([3.0, 4.0], [0.0, 0.0], np.eye(2)) == pytest.approx(25.0)
    batch = squared_mahalanobis(np.array([[1.0, 0.0], [0.0, 2.0]]), np.zeros(2), np.eye(2))
    np.testing.assert_allclose(batch, [1.0, 4.0])


def test_mn_log_density_standard_normal_at_origin():
    assert mn_log_density([0.0, 0.0], [0.0, 0.0], np.eye(2)) == pytest.approx(-math.log(2 * math.pi))


def test_mn_log_density_matches_scipy_and_hand_formula():
    rng = np.random.default_rng(3)
    for d in (1, 3, 5):
        s = spd(rng, d)
        mu = rng.standard_normal(d)
        x = rng.standard_normal((7, d))
        np.testing.assert_allclose(mn_log_density(x, mu, s),
                                   multivariate_normal(mu, s).logpdf(x), rtol=1e-12)
    x = np.array([0.4, 1.1])
    assert mn_log_density(x, [0.1, 0.2], SIGMA) == pytest.approx(mn_logpdf_2d(x, [0.1, 0.2], SIGMA), rel=1e-13)


def test_mcn_reduces_to_normal_when_eta_is_one():
    x = np.array([0.7, -1.2])
    assert mcn_log_density(x, [0, 0], SIGMA, 0.8, 1.0) == mn_log_density(x, [0, 0], SIGMA)


def test_mcn_matches_direct_sum():
    x = np.array([2.5, -1.0])
    direct = math.log(mcn_pdf(x, [0.3, 0.1], SIGMA, 0.85, 6.0))
    assert mcn_log_density(x, [0.3, 0.1], SIGMA, 0.85, 6.0) == pytest.approx(direct, rel=1e-13)


def test_mcn_far_tail_stays_finite():
    val = mcn_log_density([1e4, 1e4], [0, 0], np.eye(2), 0.999999, 50.0)
    assert np.isfinite(val)
    # the bad part dominates so the value is close to its log density
    bad = math.log(1e-6) + mn_log_density([1e4, 1e4], [0, 0], 50 * np.eye(2))
    assert val == pytest.approx(bad, rel=1e-9)


@pytest.mark.parametrize("alpha, eta", [(0.0, 2.0), (1.0, 2.0), (0.5, 0.9)])
def test_mcn_domain_errors(alpha, eta):
    with pytest.raises(DomainError):
        mcn_log_density([0, 0], [0, 0], np.eye(2), alpha, eta)


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(0.01, 0.99), eta=st.floats(1.0, 100.0),
       x=st.lists(st.floats(-20, 20), min_size=2, max_size=2))
def test_mcn_lies_between_its_parts(alpha, eta, x):
    good = mn_log_density(x, [0, 0], SIGMA)
    bad = mn_log_density(x, [0, 0], eta * SIGMA)
    val = mcn_log_density(x, [0, 0], SIGMA, alpha, eta)
    assert min(good, bad) - 1e-10 <= val <= max(good, bad) + 1e-10


def test_cholesky_ridge_retry_and_failure():
    near = np.array([[1.0, 1.0], [1.0, 1.0]])
    chol = cholesky(near)
    np.testing.assert_allclose(chol @ chol.T, near + 1e-8 * np.eye(2), atol=1e-15)
    with pytest.raises(SingularCovarianceError) as info:
        cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]), component=1)
    assert info.value.component == 1
    with pytest.raises(SingularCovarianceError):
        mn_log_density([0, 0], [0, 0], np.zeros((2, 2)))


def test_repair_covariance_leaves_pd_untouched():
    s = SIGMA + np.array([[0, 1e-17], [0, 0]])
    out = repair_covariance(s)
    np.testing.assert_array_equal(out, out.T)
    np.testing.assert_allclose(out, SIGMA, atol=1e-16)


def test_conditional_normal_bivariate():
    cn = conditional_normal([1.0, 2.0], SIGMA, [1], [3.0])
    assert cn.mean[0] == pytest.approx(1.0 + 0.6 / 1.0 * (3.0 - 2.0))
    assert cn.covariance[0, 0] == pytest.approx(2.0 - 0.36)


def test_conditional_normal_independent_block_keeps_marginal():
    mu = np.array([1.0, 2.0, 3.0])
    cn = conditional_normal(mu, np.diag([1.0, 2.0, 3.0]), [0], [10.0])
    np.testing.assert_allclose(cn.mean, [2.0, 3.0])
    np.testing.assert_allclose(cn.covariance, np.diag([2.0, 3.0]))


def test_conditional_normal_matches_joint_regression():
    rng = np.random.default_rng(1)
    s = spd(rng, 4)
    mu = rng.standard_normal(4)
    cn = conditional_normal(mu, s, [0, 2], [0.5, -0.5])
    inv = np.linalg.inv(s)
    # the conditional precision is the missing block of the joint precision
    np.testing.assert_allclose(np.linalg.inv(cn.covariance), inv[np.ix_([1, 3], [1, 3])], rtol=1e-10)


def test_conditional_normal_rejects_degenerate_index_sets():
    with pytest.raises(ValueError):
        conditional_normal([0, 0], np.eye(2), [], [])
    with pytest.raises(ValueError):
        conditional_normal([0, 0], np.eye(2), [0, 1], [1, 1])


def test_log_sum_exp():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2))
    assert log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000 + math.log(2))
    assert log_sum_exp([-np.inf, -np.inf]) == -np.inf
    assert log_sum_exp([5.0]) == 5.0
    with pytest.raises(ValueError):
        log_sum_exp([])
