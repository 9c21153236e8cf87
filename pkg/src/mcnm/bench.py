"""Replicated simulation study comparing the contaminated-normal and t mixtures.

Every cell of the grid (sample size x overlap x family x missing share) is
replicated; each replicate generates data, amputes it, fits both models with
``G = 2`` and scores them.  Run seeds are derived from the cell's descriptor
values and the replicate index, so a cell's numbers do not depend on which
other cells are in the grid or on the order in which runs finish.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ecm import fit_mcnm
from .errors import McnmError
from .fitting import FitConfig
from .metrics import adjusted_rand_index, mean_sd, outlier_rates
from .simulate import (FAMILIES, OVERLAPS, AmputationConfig, ScenarioConfig,
                       ampute, generate_scenario)
from .tmix import fit_tmix

log = logging.getLogger(__name__)

MODELS = ("mcnm", "tmix")
# families whose outlier rates the study reports; "mcn" is an extra column
OUTLIER_FAMILIES = ("mn_atypical", "mn_uniform_noise")
EXTENSION_FAMILIES = ("mcn",)
DESK_FIT = FitConfig(n_starts=3)


@dataclass(frozen=True)
class StudyGrid:
    n_values: tuple = (100, 500)
    overlaps: tuple = OVERLAPS
    families: tuple = FAMILIES
    missing_props: tuple = (0.10, 0.50, 0.80)
    replicates: int = 5
    base_seed: int = 0
    scenario: dict = field(default_factory=dict)

    def cells(self):
        return list(itertools.product(self.n_values, self.overlaps,
                                      self.families, self.missing_props))

    @classmethod
    def from_dict(cls, mapping):
        mapping = dict(mapping)
        for key in ("n_values", "overlaps", "families", "missing_props"):
            if key in mapping:
                mapping[key] = tuple(mapping[key])
        return cls(**mapping)

    def to_dict(self):
        return dataclasses.asdict(self)


def run_seeds(base_seed, n, overlap, family, prop, replicate):
    """Scenario, amputation and fit seeds for one run.

    Hash of ``(base_seed, n, overlap, family, missing share, replicate)``
    through :class:`numpy.random.SeedSequence`.
    """
    key = [int(base_seed), int(n), OVERLAPS.index(overlap) if overlap in OVERLAPS
           else sum(map(ord, overlap)) + 100, FAMILIES.index(family),
           int(round(prop * 1_000_000)), int(replicate)]
    return [int(s) for s in np.random.SeedSequence(key).generate_state(3)]


def _score(family, model_name, res, truth):
    row = {"ari": adjusted_rand_index(truth.true_labels, res.labels),
           "converged": res.converged, "n_iter": res.n_iter,
           "loglik": res.loglik, "bic": res.bic}
    if family in OUTLIER_FAMILIES + EXTENSION_FAMILIES:
        calls = (res.outlier_flag if model_name == "mcnm"
                 else res.flags["mahalanobis_outliers"])
        tpr, fpr, counts = outlier_rates(calls, truth.true_outlier)
        row.update(tpr=tpr, fpr=fpr, tp=counts.tp, fp=counts.fp, tn=counts.tn,
                   fn=counts.fn)
    return row


def run_replicate(grid, fit_cfg, cell, replicate):
    """All model rows for one replicate of one cell; failures become rows too."""
    n, overlap, family, prop = cell
    s_data, s_amp, s_fit = run_seeds(grid.base_seed, n, overlap, family, prop,
                                     replicate)
    base = {"n": n, "overlap": overlap, "family": family, "missing_prop": prop,
            "replicate": replicate, "seed": s_data,
            "extension": family in EXTENSION_FAMILIES}
    try:
        truth = generate_scenario(ScenarioConfig(
            family=family, n=n, overlap=overlap, seed=s_data, **grid.scenario))
        truth = ampute(truth, AmputationConfig(prop_rows=prop, seed=s_amp))
    except McnmError as exc:
        return [dict(base, model=m, error=f"data: {exc}") for m in MODELS]
    rows = []
    cfg = fit_cfg.replace(G=2, seed=s_fit)
    for name, fit in (("mcnm", fit_mcnm), ("tmix", fit_tmix)):
        try:
            res = fit(truth.data, 2, cfg)
        except (McnmError, np.linalg.LinAlgError) as exc:
            log.warning("run %s/%s failed: %s", base, name, exc)
            rows.append(dict(base, model=name, error=str(exc)))
            continue
        rows.append(dict(base, model=name, error="", **_score(family, name, res, truth)))
    return rows


def _job(args):
    return run_replicate(*args)


@dataclass
class StudyReport:
    grid: StudyGrid
    fit_config: FitConfig
    runs: list
    summary: list

    def to_dict(self):
        return {"schema_version": 1, "grid": self.grid.to_dict(),
                "fit_config": self.fit_config.to_dict(),
                "summary": self.summary, "runs": self.runs}

    def write(self, out_dir, plot=False):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "runs.csv", self.runs, RUN_FIELDS)
        _write_csv(out / "summary.csv", self.summary, summary_fields())
        with (out / "summary.json").open("w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if plot:
            plot_summary(self.summary, out / "ari_by_missing.png")
        return out


RUN_FIELDS = ["n", "overlap", "family", "missing_prop", "replicate", "seed",
              "model", "ari", "tpr", "fpr", "tp", "fp", "tn", "fn", "converged",
              "n_iter", "loglik", "bic", "extension", "error"]


def summary_fields():
    cols = ["n", "overlap", "family", "missing_prop", "replicates", "extension"]
    for m in MODELS:
        for metric in ("ari", "tpr", "fpr"):
            cols += [f"{metric}_{m}_mean", f"{metric}_{m}_sd"]
        cols.append(f"failed_{m}")
    return cols


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path, rows, fields):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row.get(f)) for f in fields])


def summarize(grid, runs):
    """Mean and sd of ARI, TPR, FPR per cell and model, in grid order."""
    by_cell = {}
    for row in runs:
        key = (row["n"], row["overlap"], row["family"], row["missing_prop"])
        by_cell.setdefault(key, []).append(row)
    table = []
    for cell in grid.cells():
        rows = by_cell.get(cell, [])
        entry = dict(zip(("n", "overlap", "family", "missing_prop"), cell))
        entry["replicates"] = grid.replicates
        entry["extension"] = cell[2] in EXTENSION_FAMILIES
        for m in MODELS:
            ok = [r for r in rows if r["model"] == m and not r.get("error")]
            entry[f"failed_{m}"] = sum(1 for r in rows if r["model"] == m and r.get("error"))
            for metric in ("ari", "tpr", "fpr"):
                mean, sd = mean_sd([r.get(metric) for r in ok])
                entry[f"{metric}_{m}_mean"] = mean
                entry[f"{metric}_{m}_sd"] = sd
        table.append(entry)
    return table


def run_study(grid, fit_cfg=None, workers=1):
    """Run every cell x replicate and aggregate.

    Per-run failures are recorded in the run rows and never abort the study.
    The report depends only on ``grid`` and ``fit_cfg``.
    """
    fit_cfg = fit_cfg or DESK_FIT
    jobs = [(grid, fit_cfg, cell, rep) for cell in grid.cells()
            for rep in range(grid.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    runs = [row for rows in results for row in rows]
    return StudyReport(grid=grid, fit_config=fit_cfg, runs=runs,
                       summary=summarize(grid, runs))


def plot_summary(summary, path):
    """Mean ARI against missing share, one line per family and model."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, model in zip(axes, MODELS):
        groups = {}
        for row in summary:
            label = f"{row['family']} n={row['n']} {row['overlap']}"
            groups.setdefault(label, []).append(
                (row["missing_prop"], row[f"ari_{model}_mean"]))
        for label, pts in sorted(groups.items()):
            pts = [(p, v) for p, v in sorted(pts) if v is not None]
            if pts:
                ax.plot(*zip(*pts), marker="o", lw=1, label=label)
        ax.set_title(model)
        ax.set_xlabel("share of rows with missing values")
    axes[0].set_ylabel("mean ARI")
    axes[1].legend(fontsize=6, loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
