"""EM for mixtures of multivariate Student-t distributions with missing values.

Baseline used to compare against the contaminated-normal mixture.  Each row
contributes through its observed coordinates; missing coordinates are
imputed by their conditional mean, which under the t model coincides with the
Gaussian conditional mean for the same location and scale.  The degrees of
freedom are updated per component by a bracketed root search unless fixed in
the config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import brentq
from scipy.special import digamma, gammaln
from scipy.stats import chi2

from .data import Dataset
from .errors import (ComponentCollapseError, DegenerateRowError, DomainError,
                     SingularCovarianceError)
from .fitting import (FitConfig, FitResult, best_of_starts, check_sample_size,
                      init_ridge_scale, initial_responsibilities,
                      relative_change, weighted_moments)
from .linalg import check_covariance, cholesky, log_det_from_cholesky

LOG_PI = np.log(np.pi)


@dataclass
class TComponent:
    mu: np.ndarray
    sigma: np.ndarray
    nu: float


@dataclass
class TMixModel:
    pi: np.ndarray
    components: list

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        if np.any(self.pi <= 0) or abs(self.pi.sum() - 1.0) > 1e-12:
            raise DomainError(f"invalid mixing proportions {self.pi}")
        for g, comp in enumerate(self.components):
            if not comp.nu > 0:
                raise DomainError(f"component {g}: nu must be positive")

    @classmethod
    def from_arrays(cls, pi, mu, sigma, nu):
        return cls(pi, [TComponent(np.array(m, dtype=float),
                                   np.array(s, dtype=float), float(v))
                        for m, s, v in zip(mu, sigma, nu)])

    @property
    def G(self):
        return self.pi.size

    @property
    def d(self):
        return self.components[0].mu.size

    @property
    def mu(self):
        return np.array([c.mu for c in self.components])

    @property
    def sigma(self):
        return np.array([c.sigma for c in self.components])

    @property
    def nu(self):
        return np.array([c.nu for c in self.components])

    def n_parameters(self, nu_free=True):
        d, G = self.d, self.G
        return (G - 1) + G * (d + d * (d + 1) // 2) + (G if nu_free else 0)


@dataclass
class TEStepState:
    """E-step quantities: memberships ``z_tilde`` and scale weights ``u_tilde``.

    ``x_hat``/``cond_cov`` follow the same layout as
    :class:`mcnm.ecm.EStepState`.
    """

    z_tilde: np.ndarray
    u_tilde: np.ndarray
    x_hat: np.ndarray
    cond_cov: np.ndarray
    mask: np.ndarray
    loglik: float
    row_loglik: np.ndarray


def t_log_density_from_delta(delta, log_det, p, nu):
    """Log density of a ``p``-variate t given the squared Mahalanobis distance."""
    return (gammaln(0.5 * (nu + p)) - gammaln(0.5 * nu)
            - 0.5 * p * (np.log(nu) + LOG_PI) - 0.5 * log_det
            - 0.5 * (nu + p) * np.log1p(delta / nu))


def e_step_t(ds, model, ridge=1e-8):
    n, d, G = ds.n, ds.d, model.G
    log_joint = np.empty((n, G))
    u = np.empty((n, G))
    x_hat = np.empty((n, G, d))
    cond_cov = np.zeros((n, G, d, d))
    log_pi = np.log(model.pi)
    mus, sigmas, nus = model.mu, model.sigma, model.nu
    for pattern, rows, obs, mis, xo in ds.pattern_groups:
        p = obs.size
        for g in range(G):
            chol = cholesky(sigmas[g][obs][:, obs], ridge, component=g,
                            pattern=pattern)
            diff = xo - mus[g][obs]
            sol = solve_triangular(chol, diff.T, lower=True, check_finite=False)
            delta = np.sum(sol * sol, axis=0)
            log_joint[rows, g] = log_pi[g] + t_log_density_from_delta(
                delta, log_det_from_cholesky(chol), p, nus[g])
            u[rows, g] = (nus[g] + p) / (nus[g] + delta)
            filled = np.empty((rows.size, d))
            filled[:, obs] = xo
            if mis.size:
                s_om = sigmas[g][obs][:, mis]
                gain = cho_solve((chol, True), s_om, check_finite=False).T
                filled[:, mis] = mus[g][mis] + diff @ gain.T
                cov = sigmas[g][mis][:, mis] - gain @ s_om
                block = np.zeros((d, d))
                block[np.ix_(mis, mis)] = 0.5 * (cov + cov.T)
                cond_cov[rows, g] = block
            x_hat[rows, g] = filled
    top = np.max(log_joint, axis=1)
    if not np.all(np.isfinite(top)):
        bad = int(np.flatnonzero(~np.isfinite(top))[0])
        raise DegenerateRowError(f"row {bad} has zero density under every component")
    row_ll = top + np.log(np.sum(np.exp(log_joint - top[:, None]), axis=1))
    z = np.exp(log_joint - row_ll[:, None])
    return TEStepState(z_tilde=z, u_tilde=u, x_hat=x_hat, cond_cov=cond_cov,
                       mask=ds.mask, loglik=float(row_ll.sum()), row_loglik=row_ll)


def nu_offset(z, u, d_obs, nu_prev):
    """Membership-weighted mean of ``E[log w] - E[w]`` under the previous fit."""
    half = 0.5 * (nu_prev + d_obs)
    expect = np.log(u) - u + digamma(half) - np.log(half)
    return np.sum(z * expect) / np.sum(z)


def nu_equation(nu, offset):
    """Score equation for one component's degrees of freedom (zero at the update)."""
    return 1.0 + np.log(0.5 * nu) - digamma(0.5 * nu) + offset


def update_nu(z, u, d_obs, nu_prev, nu_min, nu_max):
    """Root of :func:`nu_equation` on ``[nu_min, nu_max]``.

    Returns ``(nu, clamped)``; when the equation does not change sign on the
    bracket the nearer bound is returned and ``clamped`` is True.
    """
    offset = nu_offset(z, u, d_obs, nu_prev)
    lo = nu_equation(nu_min, offset)
    hi = nu_equation(nu_max, offset)
    # the equation is decreasing in nu
    if lo <= 0:
        return nu_min, lo < 0
    if hi >= 0:
        return nu_max, hi > 0
    root = brentq(nu_equation, nu_min, nu_max, args=(offset,),
                  xtol=1e-12, rtol=1e-12)
    return root, False


def m_step_t(ds, state, model_prev, cfg):
    z, u = state.z_tilde, state.u_tilde
    n, G = z.shape
    d = ds.d
    nk = z.sum(axis=0)
    for g in range(G):
        if nk[g] < cfg.min_eff * n:
            raise ComponentCollapseError(g, nk[g])
    pi = nk / n
    zu = z * u
    mu = np.einsum("ig,igd->gd", zu, state.x_hat) / zu.sum(axis=0)[:, None]
    sigma = np.empty((G, d, d))
    for g in range(G):
        diff = state.x_hat[:, g, :] - mu[g]
        s = (zu[:, g, None] * diff).T @ diff
        s += np.tensordot(z[:, g], state.cond_cov[:, g], axes=1)
        sigma[g] = check_covariance(s / nk[g], cfg.min_rcond, g)
    nu = model_prev.nu.copy()
    clamped = np.zeros(G, dtype=bool)
    if cfg.nu is None:
        d_obs = ds.mask.sum(axis=1)
        for g in range(G):
            nu[g], clamped[g] = update_nu(z[:, g], u[:, g], d_obs, nu[g],
                                          cfg.nu_min, cfg.nu_max)
    return pi, mu, sigma, nu, clamped


def initial_t_model(ds, G, cfg, start=0):
    x, z = initial_responsibilities(ds, G, cfg, start)
    pi, mu, sigma = weighted_moments(x, z, init_ridge_scale(x))
    nu0 = cfg.nu if cfg.nu is not None else float(
        np.clip(cfg.nu_init, cfg.nu_min, cfg.nu_max))
    return TMixModel.from_arrays(pi, mu, sigma, np.full(G, nu0))


def run_em_t(ds, model, cfg, callback=None):
    state = e_step_t(ds, model, cfg.ridge)
    trace = [state.loglik]
    converged = degenerate = False
    clamped = np.zeros(model.G, dtype=bool)
    it = 0
    for it in range(1, cfg.max_iter + 1):
        try:
            pi, mu, sigma, nu, clamped = m_step_t(ds, state, model, cfg)
        except SingularCovarianceError:
            degenerate = True
            it -= 1
            break
        model = TMixModel.from_arrays(pi / pi.sum(), mu, sigma, nu)
        state = e_step_t(ds, model, cfg.ridge)
        trace.append(state.loglik)
        if callback is not None:
            callback(it, model, state)
        if relative_change(trace[-2], trace[-1]) < cfg.tol:
            converged = True
            break
    return model, state, np.array(trace), it, converged, clamped, degenerate


def mahalanobis_outliers(ds, model, state, labels, quantile=0.975):
    """Flag rows whose imputed vector lies beyond the chi-square(d) quantile.

    Uses the squared Mahalanobis distance of ``x_hat`` under the row's own
    cluster location and scale.
    """
    cutoff = chi2.ppf(quantile, ds.d)
    flags = np.zeros(ds.n, dtype=bool)
    for g in range(model.G):
        rows = np.flatnonzero(labels == g)
        if rows.size == 0:
            continue
        chol = cholesky(model.components[g].sigma, component=g)
        sol = solve_triangular(chol, (state.x_hat[rows, g] - model.components[g].mu).T,
                               lower=True)
        flags[rows] = np.sum(sol * sol, axis=0) > cutoff
    return flags


def fit_tmix(ds, G=None, config=None, init=None, callback=None):
    """Fit a ``G``-component t mixture by EM, best of ``config.n_starts`` starts.

    The t mixture has no per-point good/bad variable, so ``outlier_flag`` is
    all False; :func:`mahalanobis_outliers` provides the reference cutoff
    call, also stored in ``result.flags["mahalanobis_outliers"]``.
    """
    cfg = config or FitConfig()
    if G is not None:
        cfg = cfg.replace(G=G)
    check_sample_size(ds.n, cfg.G, ds.d)

    def run_start(k):
        model0 = init if init is not None else initial_t_model(ds, cfg.G, cfg, k)
        model, state, trace, n_iter, conv, clamped, degen = run_em_t(ds, model0, cfg, callback)
        labels = np.argmax(state.z_tilde, axis=1)
        filled = state.x_hat[np.arange(ds.n), labels]
        imputed = Dataset(np.where(ds.mask, ds.values, filled),
                          np.ones_like(ds.mask), ds.columns)
        k_par = model.n_parameters(nu_free=cfg.nu is None)
        bic = -2.0 * trace[-1] + k_par * np.log(ds.n)
        calls = mahalanobis_outliers(ds, model, state, labels, cfg.outlier_quantile)
        return FitResult(model=model, state=state, loglik_trace=trace,
                         labels=labels, outlier_flag=np.zeros(ds.n, dtype=bool),
                         imputed=imputed, n_iter=n_iter, converged=conv,
                         bic=float(bic), model_type="tmix", start=k,
                         flags={"nu_clamped": clamped.tolist(), "degenerate": degen,
                                "mahalanobis_outliers": calls})

    return best_of_starts(run_start, 1 if init is not None else cfg.n_starts)
