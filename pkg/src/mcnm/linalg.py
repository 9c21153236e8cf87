"""Gaussian and contaminated-Gaussian kernels.

Every routine factorizes with Cholesky only.  A failed factorization is
retried once with a ridge of ``1e-8 * trace(sigma) / d`` on the diagonal;
a second failure raises :class:`~mcnm.errors.SingularCovarianceError`.
All densities are returned on the log scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DomainError, SingularCovarianceError

LOG_2PI = np.log(2.0 * np.pi)
RIDGE_FACTOR = 1e-8


def cholesky(sigma, ridge_factor=RIDGE_FACTOR, component=None, pattern=None):
    """Lower Cholesky factor of ``sigma`` with one ridge retry."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    d = sigma.shape[0]
    ridge = ridge_factor * np.trace(sigma) / d
    if np.isfinite(ridge) and ridge > 0:
        try:
            return np.linalg.cholesky(sigma + ridge * np.eye(d))
        except np.linalg.LinAlgError:
            pass
    raise SingularCovarianceError(
        "covariance is not positive definite", component=component,
        pattern=pattern)


def repair_covariance(sigma, ridge_factor=RIDGE_FACTOR, component=None):
    """Symmetrize ``sigma``; add the ridge only if Cholesky fails."""
    sigma = 0.5 * (sigma + sigma.T)
    try:
        np.linalg.cholesky(sigma)
        return sigma
    except np.linalg.LinAlgError:
        pass
    chol = cholesky(sigma, ridge_factor, component=component)
    return chol @ chol.T


def check_covariance(sigma, min_rcond=1e-10, component=None):
    """Symmetrized ``sigma``; raises if it is not safely positive definite.

    The smallest eigenvalue must exceed ``min_rcond`` times the largest.
    """
    sigma = 0.5 * (sigma + sigma.T)
    eig = np.linalg.eigvalsh(sigma)
    if not (np.all(np.isfinite(eig)) and eig[0] > min_rcond * eig[-1]):
        raise SingularCovarianceError(
            f"covariance is numerically singular (eigenvalues {eig[0]:.3g} .. "
            f"{eig[-1]:.3g})", component=component)
    return sigma


def log_det_from_cholesky(chol):
    return 2.0 * np.sum(np.log(np.diag(chol)))


def _mahalanobis_chol(diff, chol):
    # diff: (n, d) or (d,)
    sol = solve_triangular(chol, np.atleast_2d(diff).T, lower=True)
    return np.sum(sol * sol, axis=0)


def squared_mahalanobis(x, mu, sigma):
    """Squared Mahalanobis distance ``(x - mu)' sigma^{-1} (x - mu)``.

    ``x`` may be a single point of shape ``(d,)`` (returns a float) or a batch
    of shape ``(n, d)`` (returns an array of length ``n``).
    """
    x = np.asarray(x, dtype=float)
    chol = cholesky(sigma)
    delta = _mahalanobis_chol(x - np.asarray(mu, dtype=float), chol)
    return float(delta[0]) if x.ndim == 1 else delta


def mn_log_density(x, mu, sigma):
    """Log density of the multivariate normal N(mu, sigma) at ``x``.

    Accepts a single point or an ``(n, d)`` batch, like
    :func:`squared_mahalanobis`.
    """
    x = np.asarray(x, dtype=float)
    chol = cholesky(sigma)
    d = chol.shape[0]
    delta = _mahalanobis_chol(x - np.asarray(mu, dtype=float), chol)
    out = -0.5 * (d * LOG_2PI + log_det_from_cholesky(chol) + delta)
    return float(out[0]) if x.ndim == 1 else out


def mcn_log_components(delta, log_det, d, alpha, eta):
    """Weighted log densities of the good and bad parts of a contaminated normal.

    Returns ``(log(alpha) + log f(x; mu, sigma),
    log(1 - alpha) + log f(x; mu, eta * sigma))`` given the squared
    Mahalanobis distance ``delta`` under ``sigma`` and ``log|sigma|``.
    """
    base = d * LOG_2PI + log_det
    good = np.log(alpha) - 0.5 * (base + delta)
    bad = np.log1p(-alpha) - 0.5 * (base + d * np.log(eta) + delta / eta)
    return good, bad


def check_contamination(alpha, eta):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not eta >= 1.0:
        raise DomainError(f"eta must be >= 1, got {eta}")


def mcn_log_density(x, mu, sigma, alpha, eta):
    """Log density of the multivariate contaminated normal.

    ``alpha * N(x; mu, sigma) + (1 - alpha) * N(x; mu, eta * sigma)``,
    combined with log-sum-exp so nothing underflows for alpha near one or
    points far in the tail.
    """
    check_contamination(alpha, eta)
    x = np.asarray(x, dtype=float)
    chol = cholesky(sigma)
    d = chol.shape[0]
    delta = _mahalanobis_chol(x - np.asarray(mu, dtype=float), chol)
    good, bad = mcn_log_components(delta, log_det_from_cholesky(chol), d,
                                   alpha, eta)
    if eta == 1.0:
        # both parts coincide; avoid the rounding of logaddexp
        out = -0.5 * (d * LOG_2PI + log_det_from_cholesky(chol) + delta)
    else:
        out = np.logaddexp(good, bad)
    return float(out[0]) if x.ndim == 1 else out


@dataclass(frozen=True)
class ConditionalNormal:
    """Distribution of the missing block given the observed block."""

    mean: np.ndarray
    covariance: np.ndarray


def conditional_normal(mu, sigma, observed_idx, x_obs):
    """Condition N(mu, sigma) on the coordinates ``observed_idx`` taking ``x_obs``.

    Returns the mean ``mu_m + S_mo S_oo^{-1} (x_obs - mu_o)`` and covariance
    ``S_mm - S_mo S_oo^{-1} S_om`` of the remaining coordinates, in
    increasing index order.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d = mu.shape[0]
    obs = np.unique(np.asarray(observed_idx, dtype=int))
    if obs.size == 0:
        raise ValueError("observed_idx must be nonempty")
    mis = np.setdiff1d(np.arange(d), obs)
    if mis.size == 0:
        raise ValueError("no missing coordinates to condition on")
    chol = cholesky(sigma[np.ix_(obs, obs)])
    s_om = sigma[np.ix_(obs, mis)]
    gain = cho_solve((chol, True), s_om).T  # S_mo S_oo^{-1}
    diff = np.asarray(x_obs, dtype=float) - mu[obs]
    mean = mu[mis] + gain @ diff
    cov = sigma[np.ix_(mis, mis)] - gain @ s_om
    return ConditionalNormal(mean=mean, covariance=0.5 * (cov + cov.T))


def log_sum_exp(terms):
    """``log(sum(exp(terms)))`` via a max shift; ``-inf`` if every term is."""
    terms = np.asarray(terms, dtype=float)
    if terms.size == 0:
        raise ValueError("log_sum_exp needs at least one term")
    top = np.max(terms)
    if np.isneginf(top):
        return -np.inf
    if terms.size == 1:
        return float(top)
    return float(top + np.log(np.sum(np.exp(terms - top))))
