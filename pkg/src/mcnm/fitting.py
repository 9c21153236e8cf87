"""Configuration, results and start machinery shared by both mixture fitters."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2

from .errors import ConfigError, FitError, McnmError


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`~mcnm.ecm.fit_mcnm` and :func:`~mcnm.tmix.fit_tmix`.

    ``ridge`` is the relative diagonal ridge (times ``trace/d``) used to
    retry a Cholesky factorization that fails.  An updated scale matrix whose
    eigenvalue ratio falls below ``min_rcond`` ends the run at the previous
    iterate, which is then marked degenerate.  ``nu`` fixes the t degrees of
    freedom when set; otherwise they are estimated within ``[nu_min, nu_max]``.
    ``sigma_missing_weight`` selects the weight on the conditional covariance
    of missing blocks in the scale update: ``"z"`` (memberships, the exact
    expectation, keeps the likelihood ascending) or ``"w"`` (the
    eta-downweighted weights used for the imputed outer products).
    """

    G: int = 2
    tol: float = 1e-8
    max_iter: int = 500
    n_starts: int = 10
    seed: int = 0
    alpha_min: float = 0.5
    alpha_max: float = 1.0 - 1e-6
    eta_min: float = 1.0 + 1e-3
    ridge: float = 1e-8
    min_rcond: float = 1e-10
    min_eff: float = 1e-6
    alpha_init: float = 0.95
    eta_init: float = 1.1
    kmeans_restarts: int = 10
    nu: float | None = None
    nu_init: float = 10.0
    nu_min: float = 2.0001
    nu_max: float = 200.0
    outlier_quantile: float = 0.975
    sigma_missing_weight: str = "z"

    def __post_init__(self):
        if int(self.G) != self.G or self.G < 1:
            raise ConfigError(f"G must be a positive integer, got {self.G}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1 or self.n_starts < 1:
            raise ConfigError("max_iter and n_starts must be >= 1")
        if not 0.0 < self.alpha_min <= self.alpha_max < 1.0:
            raise ConfigError("need 0 < alpha_min <= alpha_max < 1")
        if not self.eta_min >= 1.0:
            raise ConfigError("eta_min must be >= 1")
        if not 0.0 < self.nu_min < self.nu_max:
            raise ConfigError("need 0 < nu_min < nu_max")
        if self.nu is not None and not self.nu > 0:
            raise ConfigError("fixed nu must be positive")
        if self.sigma_missing_weight not in ("z", "w"):
            raise ConfigError("sigma_missing_weight must be 'z' or 'w'")
        if not 0.0 <= self.min_rcond < 1.0:
            raise ConfigError("min_rcond must lie in [0, 1)")
        if not 0.0 < self.outlier_quantile < 1.0:
            raise ConfigError("outlier_quantile must lie in (0, 1)")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, mapping):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise ConfigError(f"unknown fit options: {sorted(unknown)}")
        return cls(**mapping)


@dataclass
class FitResult:
    """Outcome of a mixture fit.

    ``state`` holds the final E-step quantities under ``model``.  ``labels``
    are 0-based component indices.  ``loglik_trace[0]`` is the observed-data
    log-likelihood of the starting model and entry ``r`` follows update ``r``.
    """

    model: object
    state: object
    loglik_trace: np.ndarray
    labels: np.ndarray
    outlier_flag: np.ndarray
    imputed: object
    n_iter: int
    converged: bool
    bic: float
    model_type: str = "mcnm"
    start: int = 0
    diagnostics: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    @property
    def loglik(self):
        return float(self.loglik_trace[-1])

    def ascent_violations(self, atol=1e-8):
        """Iterations whose log-likelihood dropped by more than ``atol``."""
        steps = np.diff(self.loglik_trace)
        return [(int(r) + 1, float(-steps[r]))
                for r in np.flatnonzero(steps < -atol)]


def check_sample_size(n, G, d):
    if n <= G * d:
        raise ConfigError(f"need n > G*d ({n} <= {G * d})")
    if n < 5 * G * d:
        warnings.warn(f"only {n} rows for G={G}, d={d}; estimates may be "
                      "unstable", RuntimeWarning, stacklevel=3)


def start_rng(seed, start):
    return np.random.default_rng([int(seed), int(start)])


def mean_impute(ds):
    x = ds.values_filled()
    for j in range(ds.d):
        col = ds.mask[:, j]
        x[~col, j] = ds.values[col, j].mean() if col.any() else 0.0
    return x


def kmeans_responsibilities(x, G, rng, restarts=10):
    """Hard one-hot assignments from the best of ``restarts`` k-means++ runs."""
    n = x.shape[0]
    if G == 1:
        return np.ones((n, 1))
    best, best_inertia = None, np.inf
    for _ in range(restarts):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            centers, labels = kmeans2(x, G, minit="++", rng=rng)
        if np.unique(labels).size < G:
            continue
        inertia = np.sum((x - centers[labels]) ** 2)
        if inertia < best_inertia:
            best, best_inertia = labels, inertia
    if best is None:
        raise McnmError("k-means produced an empty cluster on every restart")
    return np.eye(G)[best]


def initial_responsibilities(ds, G, cfg, start):
    """Starting responsibilities for random start ``start``.

    Start 0 uses k-means++ on the column-mean-imputed data; later starts draw
    random soft assignments.
    """
    rng = start_rng(cfg.seed, start)
    x = mean_impute(ds)
    if start == 0:
        return x, kmeans_responsibilities(x, G, rng, cfg.kmeans_restarts)
    return x, rng.dirichlet(np.ones(G), size=ds.n)


def weighted_moments(x, z, ridge_scale):
    """Per-component proportions, means and covariances from soft weights."""
    n, d = x.shape
    nk = z.sum(axis=0)
    if np.any(nk <= 0):
        raise McnmError("initial partition has an empty component")
    mu = (z.T @ x) / nk[:, None]
    sigma = np.empty((z.shape[1], d, d))
    for g in range(z.shape[1]):
        diff = x - mu[g]
        sigma[g] = (z[:, g, None] * diff).T @ diff / nk[g]
        sigma[g] += ridge_scale * np.eye(d)
    return nk / n, mu, sigma


def init_ridge_scale(x):
    var = np.var(x, axis=0)
    return 1e-6 * max(float(np.mean(var)), 1e-12)


def best_of_starts(run_start, n_starts):
    """Run every start, keep the highest final log-likelihood.

    Starts that stopped on a degenerate scale matrix rank below every start
    that did not.  ``run_start(k)`` returns a :class:`FitResult` or raises.  Failures are
    collected as diagnostics; if all starts fail :class:`FitError` is raised.
    """
    best, diagnostics = None, []
    for k in range(n_starts):
        try:
            res = run_start(k)
        except (McnmError, np.linalg.LinAlgError, FloatingPointError) as exc:
            diagnostics.append(f"start {k}: {type(exc).__name__}: {exc}")
            continue
        diagnostics.append(
            f"start {k}: loglik {res.loglik:.6f} after {res.n_iter} "
            f"iterations{'' if res.converged else ' (not converged)'}")
        if best is None or _rank(res) > _rank(best):
            best = res
    if best is None:
        raise FitError("all starts failed", diagnostics)
    best.diagnostics = diagnostics
    return best


def _rank(res):
    return (not res.flags.get("degenerate", False), res.loglik)


def relative_change(old, new):
    return abs(new - old) / (1.0 + abs(new))
