"""Structured documents for fitted models and configs (JSON)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .ecm import McnmModel
from .errors import ConfigError
from .tmix import TMixModel

SCHEMA_VERSION = 1


def model_to_dict(model):
    if isinstance(model, McnmModel):
        comps = [{"mu": c.mu.tolist(), "sigma": c.sigma.tolist(),
                  "alpha": c.alpha, "eta": c.eta} for c in model.components]
    else:
        comps = [{"mu": c.mu.tolist(), "sigma": c.sigma.tolist(), "nu": c.nu}
                 for c in model.components]
    return {"pi": model.pi.tolist(), "components": comps}


def model_from_dict(model_type, params):
    comps = params["components"]
    mu = [c["mu"] for c in comps]
    sigma = [c["sigma"] for c in comps]
    if model_type == "mcnm":
        return McnmModel.from_arrays(params["pi"], mu, sigma,
                                     [c["alpha"] for c in comps],
                                     [c["eta"] for c in comps])
    if model_type == "tmix":
        return TMixModel.from_arrays(params["pi"], mu, sigma,
                                     [c["nu"] for c in comps])
    raise ConfigError(f"unknown model type {model_type!r}")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def result_to_dict(result, config=None, columns=()):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model_type": result.model_type,
        "G": int(result.model.G),
        "d": int(result.model.d),
        "columns": list(columns),
        "parameters": model_to_dict(result.model),
        "loglik": result.loglik,
        "bic": result.bic,
        "n_iter": int(result.n_iter),
        "converged": bool(result.converged),
        "start": int(result.start),
        "loglik_trace": result.loglik_trace.tolist(),
        "labels": result.labels.tolist(),
        "outlier_flag": result.outlier_flag.tolist(),
        "diagnostics": list(result.diagnostics),
        "flags": _plain(result.flags),
    }
    if config is not None:
        doc["config"] = config.to_dict()
    return doc


def write_json(doc, path):
    with Path(path).open("w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with Path(path).open() as fh:
        return json.load(fh)


def load_result_model(path):
    """``(model_type, model)`` from a saved result document."""
    doc = read_json(path)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported result schema version {version!r}")
    return doc["model_type"], model_from_dict(doc["model_type"], doc["parameters"])
