"""Synthetic two-cluster scenarios and MAR amputation.

Four data-generating families are provided: bivariate-style Student-t
clusters, contaminated-normal clusters, normal clusters with a few distant
atypical points, and normal clusters with uniform background noise.
:func:`ampute` then hides values under a weighted-sum MAR mechanism in the
style of ``mice::ampute``.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigError

FAMILIES = ("student_t", "mcn", "mn_atypical", "mn_uniform_noise")
OVERLAPS = ("far", "close")


def _round_half_up(x):
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class ScenarioConfig:
    """Generator settings.  The second mean is ``separation[overlap]`` times
    the all-ones vector; the first sits at the origin; both scales are I."""

    family: str = "mcn"
    n: int = 100
    overlap: str = "far"
    G: int = 2
    seed: int = 0
    d: int = 2
    separation: dict = field(default_factory=lambda: {"far": 7.0, "close": 3.0})
    t_df: float = 4.0
    mcn_alpha: float = 0.9
    mcn_eta: float = 20.0
    atypical_rate: float = 0.01
    atypical_distance: tuple = (8.0, 12.0)
    noise_rate: float = 0.05
    noise_inflation: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.overlap not in self.separation:
            raise ConfigError(f"unknown overlap {self.overlap!r}")
        if self.n < 1 or self.d < 1 or self.G < 1:
            raise ConfigError("n, d and G must be positive")
        if not 0.0 < self.mcn_alpha < 1.0 or self.mcn_eta < 1.0:
            raise ConfigError("need 0 < mcn_alpha < 1 and mcn_eta >= 1")

    def means(self):
        step = self.separation[self.overlap]
        return np.array([np.full(self.d, g * step) for g in range(self.G)])

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, mapping):
        mapping = dict(mapping)
        if "atypical_distance" in mapping:
            mapping["atypical_distance"] = tuple(mapping["atypical_distance"])
        return cls(**mapping)


@dataclass
class LabeledDataset:
    data: Dataset
    true_labels: np.ndarray
    true_outlier: np.ndarray
    true_params: dict


def _nearest_mean(x, means):
    # unit scales, so Euclidean distance is the Mahalanobis distance
    dist = np.linalg.norm(x[:, None, :] - means[None, :, :], axis=2)
    return np.argmin(dist, axis=1), np.min(dist, axis=1)


def _atypical_point(rng, center, means, lo, hi, max_tries=10_000):
    d = center.size
    for _ in range(max_tries):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        x = center + rng.uniform(lo, hi) * direction
        label, dist = _nearest_mean(x[None, :], means)
        if lo <= dist[0] <= hi:
            return x, int(label[0])
    raise RuntimeError("could not place an atypical point")


def generate_scenario(cfg):
    """Draw a labeled dataset for one scenario; reproducible from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.n, cfg.d
    means = cfg.means()
    labels = rng.choice(cfg.G, size=n, p=np.full(cfg.G, 1.0 / cfg.G))
    noise = rng.standard_normal((n, d))
    outlier = np.zeros(n, dtype=bool)
    params = {"family": cfg.family, "means": means.tolist(),
              "scale": np.eye(d).tolist(), "pi": [1.0 / cfg.G] * cfg.G}

    if cfg.family == "student_t":
        w = rng.gamma(0.5 * cfg.t_df, 2.0 / cfg.t_df, size=n)
        x = means[labels] + noise / np.sqrt(w)[:, None]
        params["df"] = cfg.t_df
    elif cfg.family == "mcn":
        bad = rng.random(n) >= cfg.mcn_alpha
        x = means[labels] + noise * np.where(bad, np.sqrt(cfg.mcn_eta), 1.0)[:, None]
        outlier = bad
        params.update(alpha=cfg.mcn_alpha, eta=cfg.mcn_eta)
    else:
        x = means[labels] + noise
        if cfg.family == "mn_atypical":
            k = _round_half_up(cfg.atypical_rate * n)
            rows = np.sort(rng.choice(n, size=k, replace=False))
            lo, hi = cfg.atypical_distance
            for i in rows:
                x[i], labels[i] = _atypical_point(rng, means[labels[i]], means, lo, hi)
            params.update(atypical_rate=cfg.atypical_rate,
                          atypical_distance=[lo, hi])
        else:
            k = _round_half_up(cfg.noise_rate * n)
            rows = np.sort(rng.choice(n, size=k, replace=False))
            keep = np.setdiff1d(np.arange(n), rows)
            lo, hi = x[keep].min(axis=0), x[keep].max(axis=0)
            half = 0.5 * (hi - lo) * (1.0 + cfg.noise_inflation)
            center = 0.5 * (hi + lo)
            x[rows] = rng.uniform(center - half, center + half, size=(k, d))
            labels[rows], _ = _nearest_mean(x[rows], means)
            params.update(noise_rate=cfg.noise_rate,
                          noise_box=[(center - half).tolist(), (center + half).tolist()])
        outlier[rows] = True
    return LabeledDataset(data=Dataset(x, np.ones((n, d), dtype=bool)),
                          true_labels=labels.astype(int), true_outlier=outlier,
                          true_params=params)


def default_patterns(d, rng=None):
    """Ten default amputation patterns (True = made missing) and MAR weights.

    For ``d == 2`` the ten slots cycle over the two single-coordinate
    patterns; the weight on the remaining coordinate alternates in sign
    every two slots.  For ``d > 2`` the ``d`` single-coordinate patterns are
    padded with random two-coordinate patterns up to ten; weights are one on
    every coordinate that stays observed.
    """
    if d < 2:
        raise ConfigError("amputation needs at least two columns")
    if d == 2:
        patterns = np.array([[k % 2 == 0, k % 2 == 1] for k in range(10)])
        signs = np.array([1.0 if (k // 2) % 2 == 0 else -1.0 for k in range(10)])
        weights = (~patterns).astype(float) * signs[:, None]
        return patterns, weights
    rng = rng if rng is not None else np.random.default_rng(0)
    patterns = [np.eye(d, dtype=bool)[j] for j in range(d)]
    while len(patterns) < 10:
        p = np.zeros(d, dtype=bool)
        p[rng.choice(d, size=2, replace=False)] = True
        patterns.append(p)
    patterns = np.array(patterns)
    return patterns, (~patterns).astype(float)


@dataclass(frozen=True)
class AmputationConfig:
    """Share of rows to ampute, candidate patterns and MAR weights.

    ``patterns`` and ``weights`` default to :func:`default_patterns`.
    """

    prop_rows: float = 0.1
    patterns: object = None
    weights: object = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.prop_rows < 1.0:
            raise ConfigError(f"prop_rows must lie in (0, 1), got {self.prop_rows}")

    def resolve(self, d):
        rng = np.random.default_rng([int(self.seed), 1])
        if self.patterns is None:
            patterns, weights = default_patterns(d, rng)
        else:
            patterns = np.atleast_2d(np.asarray(self.patterns, dtype=bool))
            weights = (np.atleast_2d(np.asarray(self.weights, dtype=float))
                       if self.weights is not None else (~patterns).astype(float))
        if patterns.shape[1] != d:
            raise ConfigError(f"patterns have {patterns.shape[1]} columns, data has {d}")
        if weights.shape != patterns.shape:
            raise ConfigError("weights and patterns differ in shape")
        if np.any(patterns.all(axis=1)):
            raise ConfigError("a pattern may not hide every coordinate")
        if not np.any(patterns.any(axis=1)):
            raise ConfigError("every pattern is empty")
        return patterns, weights

    def to_dict(self):
        out = dataclasses.asdict(self)
        for key in ("patterns", "weights"):
            if out[key] is not None:
                out[key] = np.asarray(out[key]).tolist()
        return out


def _logistic(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def ampute(data, cfg):
    """Hide values in exactly ``round(prop_rows * n)`` rows.

    Every row is assigned one pattern uniformly at random.  Its weighted sum
    of the coordinates that stay observed is standardized within the
    pattern group and mapped through the logistic function; the amputed
    rows are then drawn without replacement with probability proportional
    to that score, so higher scores are more likely to lose values.
    Accepts a :class:`Dataset` or :class:`LabeledDataset` and returns the
    same type.
    """
    labeled = isinstance(data, LabeledDataset)
    ds = data.data if labeled else data
    if not ds.fully_observed:
        raise ConfigError("ampute expects a fully observed dataset")
    patterns, weights = cfg.resolve(ds.d)
    n = ds.n
    m = _round_half_up(cfg.prop_rows * n)
    if m < 1:
        warnings.warn(f"prop_rows * n = {cfg.prop_rows * n:.3g} < 1; nothing amputed",
                      RuntimeWarning, stacklevel=2)
        return data
    rng = np.random.default_rng(cfg.seed)
    slot = rng.integers(len(patterns), size=n)
    x = ds.values
    score = np.sum(x * weights[slot] * ~patterns[slot], axis=1)
    for k in np.unique(slot):
        rows = slot == k
        sd = score[rows].std()
        score[rows] = (score[rows] - score[rows].mean()) / sd if sd > 0 else 0.0
    prob = _logistic(score)
    chosen = np.sort(rng.choice(n, size=m, replace=False, p=prob / prob.sum()))
    mask = np.ones((n, ds.d), dtype=bool)
    mask[chosen] = ~patterns[slot[chosen]]
    out = Dataset(x, mask, ds.columns)
    if labeled:
        return dataclasses.replace(data, data=out)
    return out
