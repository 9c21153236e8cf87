"""ECM fitting of mixtures of multivariate contaminated normals to incomplete data.

Each component is ``alpha * N(mu, Sigma) + (1 - alpha) * N(mu, eta * Sigma)``.
One iteration is an E-step followed by two conditional maximizations: the
first updates ``pi, alpha, mu, Sigma`` with ``eta`` held fixed, the second
updates ``eta``.  Missing cells are handled by conditioning on the observed
coordinates of each row; rows sharing a missingness pattern are processed
together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .data import Dataset
from .errors import (ComponentCollapseError, DegenerateRowError, DomainError,
                     SingularCovarianceError)
from .fitting import (FitConfig, FitResult, best_of_starts, check_sample_size,
                      init_ridge_scale, initial_responsibilities,
                      relative_change, weighted_moments)
from .linalg import (check_covariance, cholesky, log_det_from_cholesky,
                     mcn_log_components)


@dataclass
class McnComponent:
    mu: np.ndarray
    sigma: np.ndarray
    alpha: float
    eta: float


@dataclass
class McnmModel:
    """Mixing proportions ``pi`` and one :class:`McnComponent` per cluster."""

    pi: np.ndarray
    components: list

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        if len(self.components) != self.pi.size:
            raise DomainError("pi and components differ in length")
        if np.any(self.pi <= 0) or abs(self.pi.sum() - 1.0) > 1e-12:
            raise DomainError(f"invalid mixing proportions {self.pi}")
        for g, comp in enumerate(self.components):
            if not 0.0 < comp.alpha < 1.0:
                raise DomainError(f"component {g}: alpha {comp.alpha} not in (0, 1)")
            if not comp.eta >= 1.0:
                raise DomainError(f"component {g}: eta {comp.eta} < 1")

    @classmethod
    def from_arrays(cls, pi, mu, sigma, alpha, eta):
        comps = [McnComponent(np.array(m, dtype=float), np.array(s, dtype=float),
                              float(a), float(e))
                 for m, s, a, e in zip(mu, sigma, alpha, eta)]
        return cls(pi, comps)

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
    def alpha(self):
        return np.array([c.alpha for c in self.components])

    @property
    def eta(self):
        return np.array([c.eta for c in self.components])

    def n_parameters(self):
        d, G = self.d, self.G
        return (G - 1) + G * (d + d * (d + 1) // 2 + 2)


@dataclass
class EStepState:
    """Conditional expectations for every row ``i`` and component ``g``.

    ``x_hat[i, g]`` is row ``i`` with its missing coordinates replaced by
    their conditional mean under component ``g``; ``cond_cov[i, g]`` is the
    conditional covariance of the missing block, embedded in a ``d x d``
    matrix that is zero on observed rows/columns.  Use :meth:`x_tilde` and
    :meth:`xxT_tilde` for the compact missing-coordinate views.
    """

    z_tilde: np.ndarray
    v_tilde: np.ndarray
    w_tilde: np.ndarray
    x_hat: np.ndarray
    cond_cov: np.ndarray
    mask: np.ndarray
    loglik: float
    row_loglik: np.ndarray

    def x_tilde(self, i, g):
        return self.x_hat[i, g][~self.mask[i]]

    def xxT_tilde(self, i, g):
        m = ~self.mask[i]
        xt = self.x_hat[i, g][m]
        return np.outer(xt, xt) + self.cond_cov[i, g][np.ix_(m, m)]


def _pattern_blocks(ds, model, ridge=1e-8):
    """Yield per (pattern, component) Cholesky pieces of the observed block."""
    mus, sigmas = model.mu, model.sigma
    for pattern, rows, obs, _, xo in ds.pattern_groups:
        for g in range(model.G):
            s_oo = sigmas[g][obs][:, obs]
            chol = cholesky(s_oo, ridge, component=g, pattern=pattern)
            diff = xo - mus[g][obs]
            sol = solve_triangular(chol, diff.T, lower=True, check_finite=False)
            delta = np.sum(sol * sol, axis=0)
            yield pattern, rows, obs, xo, g, chol, diff, delta


def _normalize(log_joint):
    top = np.max(log_joint, axis=1)
    if np.any(np.isneginf(top)) or not np.all(np.isfinite(top)):
        bad = int(np.flatnonzero(~np.isfinite(top))[0])
        raise DegenerateRowError(f"row {bad} has zero density under every component")
    row_ll = top + np.log(np.sum(np.exp(log_joint - top[:, None]), axis=1))
    return row_ll, np.exp(log_joint - row_ll[:, None])


def component_log_densities(ds, model, ridge=1e-8):
    """``log(pi_g) + log f_MCN(x_i^o)`` for every row and component, shape (n, G)."""
    out = np.empty((ds.n, model.G))
    log_pi = np.log(model.pi)
    for pattern, rows, obs, xo, g, chol, diff, delta in _pattern_blocks(ds, model, ridge):
        comp = model.components[g]
        good, bad = mcn_log_components(delta, log_det_from_cholesky(chol),
                                       obs.size, comp.alpha, comp.eta)
        out[rows, g] = log_pi[g] + np.logaddexp(good, bad)
    return out


def observed_mcn_log_likelihood(ds, model, ridge=1e-8):
    """Observed-data log-likelihood of ``model``.

    The contaminated normal marginalizes block-wise, so row ``i`` contributes
    ``log sum_g pi_g f_MCN(x_i^o; mu_g^o, Sigma_g^oo, alpha_g, eta_g)``.
    """
    row_ll, _ = _normalize(component_log_densities(ds, model, ridge))
    return float(np.sum(row_ll))


def e_step(ds, model, ridge=1e-8):
    """Posterior memberships, good-point probabilities and imputations."""
    n, d, G = ds.n, ds.d, model.G
    log_joint = np.empty((n, G))
    v = np.empty((n, G))
    x_hat = np.empty((n, G, d))
    cond_cov = np.zeros((n, G, d, d))
    log_pi = np.log(model.pi)
    mus, sigmas = model.mu, model.sigma
    for pattern, rows, obs, xo, g, chol, diff, delta in _pattern_blocks(ds, model, ridge):
        comp = model.components[g]
        good, bad = mcn_log_components(delta, log_det_from_cholesky(chol),
                                       obs.size, comp.alpha, comp.eta)
        log_mcn = np.logaddexp(good, bad)
        log_joint[rows, g] = log_pi[g] + log_mcn
        v[rows, g] = np.exp(good - log_mcn)

        filled = np.empty((rows.size, d))
        filled[:, obs] = xo
        mis = np.flatnonzero(~pattern)
        if mis.size:
            s_om = sigmas[g][obs][:, mis]
            gain = cho_solve((chol, True), s_om, check_finite=False).T
            filled[:, mis] = mus[g][mis] + diff @ gain.T
            cov = sigmas[g][mis][:, mis] - gain @ s_om
            block = np.zeros((d, d))
            block[np.ix_(mis, mis)] = 0.5 * (cov + cov.T)
            cond_cov[rows, g] = block
        x_hat[rows, g] = filled

    row_ll, z = _normalize(log_joint)
    w = z * (v + (1.0 - v) / model.eta)
    return EStepState(z_tilde=z, v_tilde=v, w_tilde=w, x_hat=x_hat,
                      cond_cov=cond_cov, mask=ds.mask, loglik=float(row_ll.sum()),
                      row_loglik=row_ll)


def cm_step_1(ds, state, model_prev, cfg=None):
    """Update ``pi, alpha, mu, Sigma`` with ``eta`` held at its previous value.

    ``Sigma`` is built around the previous mean ``mu_prev`` and divided by
    the summed memberships.  The missing block also picks up the conditional
    covariance, weighted by ``z`` or ``w`` per ``cfg.sigma_missing_weight``.
    Returns ``(pi, alpha, mu, sigma)`` arrays.
    """
    cfg = cfg or FitConfig()
    z, v, w = state.z_tilde, state.v_tilde, state.w_tilde
    n, G = z.shape
    nk = z.sum(axis=0)
    for g in range(G):
        if nk[g] < cfg.min_eff * n:
            raise ComponentCollapseError(g, nk[g])
    pi = nk / n
    alpha = np.clip((z * v).sum(axis=0) / nk, cfg.alpha_min, cfg.alpha_max)
    sw = w.sum(axis=0)
    mu = np.einsum("ig,igd->gd", w, state.x_hat) / sw[:, None]
    mu_prev = model_prev.mu
    cov_weight = z if cfg.sigma_missing_weight == "z" else w
    d = mu.shape[1]
    sigma = np.empty((G, d, d))
    for g in range(G):
        diff = state.x_hat[:, g, :] - mu_prev[g]
        s = (w[:, g, None] * diff).T @ diff
        s += np.tensordot(cov_weight[:, g], state.cond_cov[:, g], axes=1)
        sigma[g] = check_covariance(s / nk[g], cfg.min_rcond, g)
    return pi, alpha, mu, sigma


def cm_step_2(ds, state, mu_new, sigma_new, eta_prev, eta_min=1.001):
    """Update ``eta`` from the imputed rows and the freshly updated ``mu, Sigma``.

    ``eta_g = sum_i z(1 - v) delta(x_hat_ig) / sum_i d_i^o z(1 - v)``, floored
    at ``eta_min``.  Components with no bad-point mass keep ``eta_prev`` and
    are reported in the returned boolean ``no_contamination`` array.
    """
    z, v = state.z_tilde, state.v_tilde
    G = z.shape[1]
    d_obs = ds.mask.sum(axis=1)
    eta = np.array(eta_prev, dtype=float).copy()
    no_contamination = np.zeros(G, dtype=bool)
    for g in range(G):
        bad_mass = z[:, g] * (1.0 - v[:, g])
        den = np.sum(d_obs * bad_mass)
        if not den > 0:
            no_contamination[g] = True
            continue
        chol = cholesky(sigma_new[g], component=g)
        sol = solve_triangular(chol, (state.x_hat[:, g, :] - mu_new[g]).T, lower=True)
        delta = np.sum(sol * sol, axis=0)
        eta[g] = max(np.sum(bad_mass * delta) / den, eta_min)
    return eta, no_contamination


def classify_points(result_or_state):
    """Hard labels (ties go to the lowest index) and outlier flags.

    A point is an outlier when its good-point probability under its own
    cluster is strictly below 0.5.
    """
    state = getattr(result_or_state, "state", result_or_state)
    labels = np.argmax(state.z_tilde, axis=1)
    v_own = state.v_tilde[np.arange(labels.size), labels]
    return labels, v_own < 0.5


def impute(ds, state, labels):
    """Copy of ``ds`` with missing cells taken from the assigned component."""
    filled = state.x_hat[np.arange(ds.n), labels]
    values = np.where(ds.mask, ds.values, filled)
    return Dataset(values, np.ones_like(ds.mask), ds.columns)


def initial_model(ds, G, cfg, start=0):
    x, z = initial_responsibilities(ds, G, cfg, start)
    pi, mu, sigma = weighted_moments(x, z, init_ridge_scale(x))
    alpha = np.full(G, np.clip(cfg.alpha_init, cfg.alpha_min, cfg.alpha_max))
    eta = np.full(G, max(cfg.eta_init, cfg.eta_min))
    return McnmModel.from_arrays(pi, mu, sigma, alpha, eta)


def run_ecm(ds, model, cfg, callback=None):
    """Iterate ECM from ``model`` until the relative log-likelihood change < tol.

    ``callback(iteration, model, state)`` is invoked after every update.
    A numerically singular scale update stops the run at the current model;
    ``degenerate`` is then True.  Returns ``(model, state, trace, n_iter,
    converged, no_contamination, degenerate)``.
    """
    state = e_step(ds, model, cfg.ridge)
    trace = [state.loglik]
    converged = degenerate = False
    no_contamination = np.zeros(model.G, dtype=bool)
    it = 0
    for it in range(1, cfg.max_iter + 1):
        try:
            pi, alpha, mu, sigma = cm_step_1(ds, state, model, cfg)
        except SingularCovarianceError:
            degenerate = True
            it -= 1
            break
        eta, no_contamination = cm_step_2(ds, state, mu, sigma, model.eta, cfg.eta_min)
        model = McnmModel.from_arrays(pi / pi.sum(), mu, sigma, alpha, eta)
        state = e_step(ds, model, cfg.ridge)
        trace.append(state.loglik)
        if callback is not None:
            callback(it, model, state)
        if relative_change(trace[-2], trace[-1]) < cfg.tol:
            converged = True
            break
    return model, state, np.array(trace), it, converged, no_contamination, degenerate


def _result(ds, model, state, trace, n_iter, converged, start, flags):
    labels, outliers = classify_points(state)
    bic = -2.0 * trace[-1] + model.n_parameters() * np.log(ds.n)
    return FitResult(model=model, state=state, loglik_trace=trace,
                     labels=labels, outlier_flag=outliers,
                     imputed=impute(ds, state, labels), n_iter=n_iter,
                     converged=converged, bic=float(bic), model_type="mcnm",
                     start=start, flags=flags)


def fit_mcnm(ds, G=None, config=None, init=None, callback=None):
    """Fit a ``G``-component contaminated-normal mixture by ECM.

    Runs ``config.n_starts`` starts (k-means++ first, then random soft
    assignments) and keeps the one with the highest final observed-data
    log-likelihood.  Passing ``init`` runs a single start from that model.
    """
    cfg = config or FitConfig()
    if G is not None:
        cfg = cfg.replace(G=G)
    check_sample_size(ds.n, cfg.G, ds.d)

    def run_start(k):
        model0 = init if init is not None else initial_model(ds, cfg.G, cfg, k)
        model, state, trace, n_iter, conv, no_cont, degen = run_ecm(ds, model0, cfg, callback)
        return _result(ds, model, state, trace, n_iter, conv, k,
                       {"no_contamination": no_cont.tolist(), "degenerate": degen})

    return best_of_starts(run_start, 1 if init is not None else cfg.n_starts)
