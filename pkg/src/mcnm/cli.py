"""Command-line interface: ``mcnm {fit,simulate,ampute,bench,impute}``.

Exit codes: 0 success, 2 fit finished without converging (outputs still
written), 1 other failure, 64 usage error, 65 bad input data.  ``--seed``
defaults to the ``MCNM_SEED`` environment variable, else 0.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bench, io
from .data import Dataset, load_dataset, write_dataset
from .ecm import e_step, fit_mcnm
from .errors import ConfigError, DataError, McnmError
from .fitting import FitConfig
from .simulate import (FAMILIES, AmputationConfig, ScenarioConfig, ampute,
                       generate_scenario)
from .tmix import e_step_t, fit_tmix

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
EXIT_USAGE, EXIT_DATA = 64, 65

log = logging.getLogger("mcnm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed():
    raw = os.environ.get("MCNM_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MCNM_SEED must be an integer, got {raw!r}") from None


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _g_list(text):
    return [_positive_int(part) for part in text.split(",") if part.strip()]


def _add_fit_options(p):
    p.add_argument("--config", type=Path, help="JSON file with fit options")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=_positive_int)
    p.add_argument("--n-starts", type=_positive_int)
    p.add_argument("--alpha-min", type=float)
    p.add_argument("--alpha-max", type=float)
    p.add_argument("--eta-min", type=float)
    p.add_argument("--ridge", type=float)
    p.add_argument("--nu", type=float, help="fix the t degrees of freedom")
    p.add_argument("--sigma-missing-weight", choices=("z", "w"))


def build_parser():
    parser = _Parser(prog="mcnm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a mixture to a data file")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--model", choices=("mcnm", "tmix"), default="mcnm")
    p.add_argument("--g", type=_g_list, required=True,
                   help="number of clusters, or a comma list to compare BIC")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--missing-token", default="NA")
    p.add_argument("--seed", type=int)
    _add_fit_options(p)

    p = sub.add_parser("simulate", help="generate a labeled scenario dataset")
    p.add_argument("--family", choices=FAMILIES, default="mcn")
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--overlap", default="far")
    p.add_argument("--d", type=_positive_int, default=2)
    p.add_argument("--config", type=Path, help="JSON scenario options")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--truth", type=Path, help="sidecar truth file (default <out>.truth.json)")

    p = sub.add_parser("ampute", help="hide values under the MAR mechanism")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--prop", type=float, required=True, help="share of rows to ampute")
    p.add_argument("--config", type=Path, help="JSON with patterns/weights")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--missing-token", default="NA")

    p = sub.add_parser("bench", help="run the replicated simulation study")
    p.add_argument("--grid", type=Path, help="JSON grid (and optional 'fit' block)")
    p.add_argument("--replicates", type=_positive_int)
    p.add_argument("--full-paper-scale", action="store_true",
                   help="20 replicates per cell")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--plot", action="store_true", help="write a summary PNG")

    p = sub.add_parser("impute", help="fill missing cells using a saved fit")
    p.add_argument("--result", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--missing-token", default="NA")
    return parser


def _seed(args):
    return args.seed if args.seed is not None else _default_seed()


def _fit_config(args):
    options = io.read_json(args.config) if args.config else {}
    for name in ("tol", "max_iter", "n_starts", "alpha_min", "alpha_max",
                 "eta_min", "ridge", "nu", "sigma_missing_weight"):
        value = getattr(args, name, None)
        if value is not None:
            options[name] = value
    options["seed"] = _seed(args)
    try:
        return FitConfig.from_dict(options)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _write_column(path, name, values):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name])
        writer.writerows([[v] for v in values])


def cmd_fit(args):
    cfg = _fit_config(args)
    ds = load_dataset(args.data, args.missing_token)
    fit = fit_mcnm if args.model == "mcnm" else fit_tmix
    results, failures = {}, {}
    for G in args.g:
        try:
            results[G] = fit(ds, G, cfg.replace(G=G))
        except (McnmError, np.linalg.LinAlgError) as exc:
            if len(args.g) == 1:
                raise
            failures[G] = str(exc)
            log.warning("G=%d failed: %s", G, exc)
    if not results:
        raise McnmError("every G failed: " + "; ".join(
            f"G={G}: {msg}" for G, msg in failures.items()))
    best_G = min(results, key=lambda G: (results[G].bic, G))
    res = results[best_G]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(io.result_to_dict(res, cfg.replace(G=best_G), ds.columns),
                  out / "result.json")
    _write_column(out / "labels.csv", "label", res.labels.tolist())
    flags = res.outlier_flag if args.model == "mcnm" else res.flags["mahalanobis_outliers"]
    _write_column(out / "outliers.csv", "outlier", [int(f) for f in flags])
    write_dataset(res.imputed, out / "imputed.csv", args.missing_token)
    if len(args.g) > 1:
        with (out / "bic.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["G", "loglik", "bic", "converged", "error"])
            for G in args.g:
                r = results.get(G)
                if r is None:
                    writer.writerow([G, "", "", "", failures[G]])
                else:
                    writer.writerow([G, repr(r.loglik), repr(r.bic), int(r.converged), ""])

    sizes = np.bincount(res.labels, minlength=best_G)
    print(f"model      {args.model} (G={best_G})")
    if len(args.g) > 1:
        for G in args.g:
            shown = f"{results[G].bic:.4f}" if G in results else "failed"
            print(f"  G={G}: BIC {shown}")
    print(f"loglik     {res.loglik:.6f}")
    status = "converged" if res.converged else "NOT converged"
    if res.flags.get("degenerate"):
        status += ", stopped on a singular scale matrix"
    print(f"iterations {res.n_iter} ({status})")
    print(f"BIC        {res.bic:.4f}")
    print(f"clusters   {' '.join(str(int(s)) for s in sizes)}")
    print(f"outliers   {int(np.sum(flags))}")
    print(f"written to {out}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_simulate(args):
    options = io.read_json(args.config) if args.config else {}
    options.update(family=args.family, n=args.n, overlap=args.overlap, d=args.d,
                   seed=_seed(args))
    try:
        cfg = ScenarioConfig.from_dict(options)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    lab = generate_scenario(cfg)
    write_dataset(lab.data, args.out)
    truth_path = args.truth or args.out.with_name(args.out.name + ".truth.json")
    io.write_json({"schema_version": io.SCHEMA_VERSION,
                   "scenario": io._plain(cfg.to_dict()),
                   "labels": lab.true_labels.tolist(),
                   "outlier": lab.true_outlier.tolist(),
                   "params": io._plain(lab.true_params)}, truth_path)
    print(f"{cfg.family}: n={cfg.n}, outliers={int(lab.true_outlier.sum())} -> {args.out}")
    return EXIT_OK


def cmd_ampute(args):
    options = io.read_json(args.config) if args.config else {}
    options.update(prop_rows=args.prop, seed=_seed(args))
    try:
        cfg = AmputationConfig(**options)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    ds = load_dataset(args.data, args.missing_token)
    out = ampute(ds, cfg)
    write_dataset(out, args.out, args.missing_token)
    rows = int(np.sum(~out.mask.all(axis=1)))
    print(f"{rows} of {out.n} rows amputed -> {args.out}")
    return EXIT_OK


def cmd_bench(args):
    options = io.read_json(args.grid) if args.grid else {}
    fit_options = options.pop("fit", {})
    options["base_seed"] = _seed(args)
    if args.full_paper_scale:
        options["replicates"] = 20
    elif args.replicates is not None:
        options["replicates"] = args.replicates
    try:
        grid = bench.StudyGrid.from_dict(options)
        fit_cfg = bench.DESK_FIT.replace(**fit_options)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    report = bench.run_study(grid, fit_cfg, workers=args.workers)
    report.write(args.out, plot=args.plot)
    failed = sum(1 for r in report.runs if r.get("error"))
    print(f"{len(grid.cells())} cells x {grid.replicates} replicates, "
          f"{failed} failed fits -> {args.out}")
    for row in report.summary:
        ari = [row[f"ari_{m}_mean"] for m in bench.MODELS]
        shown = " ".join("   nan" if a is None else f"{a:6.3f}" for a in ari)
        print(f"  n={row['n']:<4} {row['overlap']:<5} {row['family']:<16} "
              f"miss={row['missing_prop']:.2f}  ARI mcnm/tmix {shown}")
    return EXIT_OK


def cmd_impute(args):
    model_type, model = io.load_result_model(args.result)
    ds = load_dataset(args.data, args.missing_token)
    if ds.d != model.d:
        raise DataError(f"data has {ds.d} columns, model expects {model.d}")
    state = e_step(ds, model) if model_type == "mcnm" else e_step_t(ds, model)
    labels = np.argmax(state.z_tilde, axis=1)
    filled = state.x_hat[np.arange(ds.n), labels]
    out = Dataset(np.where(ds.mask, ds.values, filled), np.ones_like(ds.mask), ds.columns)
    write_dataset(out, args.out, args.missing_token)
    print(f"imputed {int(np.sum(~ds.mask))} cells -> {args.out}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "ampute": cmd_ampute,
            "bench": cmd_bench, "impute": cmd_impute}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mcnm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"mcnm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (McnmError, OSError, ValueError) as exc:
        print(f"mcnm: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
