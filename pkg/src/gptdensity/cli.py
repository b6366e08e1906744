"""Command-line interface: ``gptdensity <command> ...``.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmarks, estimation
from .centering import default_mean, inverse_cdf_mean
from .exceptions import GPTError, InvalidArgumentError
from .gp import GaussianLaw, correlation, mvn_sample
from .io import (Manifest, RunConfig, load_config, predictor_columns, read_csv,
                 read_single_column, write_csv, write_json, write_rows)
from .model import (Dataset, MARRON_WAND_IDS, TransferFunction, eval_model_density,
                    midpoint_grid, standardize, with_prediction_rows)
from .sampler import run_chain

logger = logging.getLogger("gptdensity")


def _seed(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.model.seed
    return 0 if seed is None else int(seed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _parameter_summary(trace, label_prefix=("y",)):
    rows = []
    for j in range(trace.n_channels):
        name = "y" if j == 0 else f"z{j}"
        for param in ("sigma", "phi", "c"):
            values = getattr(trace, param)[:, j]
            q05, q50, q95 = np.quantile(values, [0.05, 0.5, 0.95])
            rows.append((name, param, values.mean(), values.std(), q05, q50, q95))
    return rows


def cmd_estimate_density(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    out = _out_dir(args)
    values = read_single_column(args.data)
    data = standardize(Dataset(values))
    model = replace(cfg.model, seed=seed)
    manifest = Manifest("estimate-density", cfg, seed)
    trace = run_chain(data, model)
    manifest.add_chain("density", trace.manifest)
    y_grid = estimation.default_y_grid(data.y, size=cfg.y_grid_size)
    est = estimation.destandardize_density(
        estimation.marginal_density_estimate(trace, y_grid, cfg.band_level), data.y_std)
    manifest.add_output(write_csv(out / "density.csv", est.as_columns()))
    manifest.add_output(write_rows(out / "samples_summary.csv",
                                   ("channel", "parameter", "mean", "sd", "q05", "q50", "q95"),
                                   _parameter_summary(trace)))
    manifest.data["density_integral"] = est.integral()
    manifest.write(out)
    return 0


def cmd_regress(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    out = _out_dir(args)
    train = read_csv(args.train)
    if "y" not in train:
        raise InvalidArgumentError(f"{args.train}: missing response column 'y'")
    zcols = predictor_columns(train, args.train)
    test = read_csv(args.test, allow_empty=True)
    missing = [c for c in zcols if c not in test]
    if missing:
        raise InvalidArgumentError(f"{args.test}: missing predictor columns {missing}")
    z_train = np.column_stack([train[c] for c in zcols])
    z_test = np.column_stack([test[c] for c in zcols]) if len(test[zcols[0]]) else np.empty((0, len(zcols)))
    data = standardize(with_prediction_rows(Dataset(train["y"], z_train), z_test))
    model = replace(cfg.model, seed=seed)
    manifest = Manifest("regress", cfg, seed)
    trace = run_chain(data, model)
    manifest.add_chain("regression", trace.manifest)

    if args.z is not None:
        z_points = [np.atleast_1d(v) for v in args.z]
        if len(zcols) != 1:
            raise InvalidArgumentError("--z only supports a single predictor column")
    else:
        z_points = [np.quantile(z_train, q, axis=0) for q in cfg.z_quantiles]
    y_grid = estimation.default_y_grid(data.y, size=cfg.y_grid_size)
    index_rows = []
    for i, z in enumerate(z_points):
        z_std = np.array([s.forward(v) for s, v in zip(data.z_std, z)])
        est = estimation.destandardize_density(
            estimation.conditional_density_estimate(trace, y_grid, z_std, cfg.band_level),
            data.y_std)
        path = write_csv(out / f"conditional_{i}.csv", est.as_columns())
        manifest.add_output(path)
        index_rows.append((i, *np.atleast_1d(z), est.integral(), path.name))
    manifest.add_output(write_rows(out / "conditional_index.csv",
                                   ("index", *zcols, "integral", "file"), index_rows))

    n_test = z_test.shape[0]
    if n_test:
        rng = np.random.default_rng(seed)
        draws = data.y_std.inverse(estimation.heldout_draws(trace, rng))
        means = data.y_std.inverse(estimation.heldout_means(trace))
        manifest.add_output(write_csv(out / "predictive_draws.csv",
                                      {f"row{r}": draws[r] for r in range(n_test)}))
        alpha = 0.5 * (1 - cfg.level)
        lo, hi = np.quantile(draws, [alpha, 1 - alpha], axis=1)
        manifest.add_output(write_csv(out / "predictions.csv",
                                      {"row": np.arange(n_test), "mean": means, "lower": lo, "upper": hi}))
        if "y" in test:
            metrics = estimation.mse_coverage(draws, test["y"], cfg.level, means=means)
            manifest.add_output(write_json(out / "metrics.json", metrics.to_dict()))
    manifest.write(out)
    return 0


def cmd_benchmark_mw(args) -> int:
    cfg = load_config(args.config)
    if args.replicates is not None:
        cfg.replicates = args.replicates
    if args.ids is not None:
        bad = [i for i in args.ids if i not in MARRON_WAND_IDS]
        if bad:
            raise InvalidArgumentError(f"unsupported Marron-Wand ids {bad}; choose from {MARRON_WAND_IDS}")
        cfg.ids = args.ids
    seed = _seed(args, cfg)
    out = _out_dir(args)
    if cfg.replicates == 0:
        warnings.warn("replicates=0: writing an empty table")
    manifest = Manifest("benchmark-mw", cfg, seed)
    rows, means = benchmarks.benchmark_mw(cfg, seed, args.threads)
    for row in rows:
        manifest.add_chain(f"MW{row['id']}-rep{row['replicate']}", row["manifest"])
    header = ["method"] + [f"MW{i}" for i in cfg.ids if i in means]
    table_rows = [["GPT"] + [means[i] for i in cfg.ids if i in means]] if means else []
    manifest.add_output(write_rows(out / "table1.csv", header, table_rows))
    manifest.add_output(write_rows(out / "replicates.csv", ("id", "replicate", "seed", "l1"),
                                   [(r["id"], r["replicate"], r["seed"], r["l1"]) for r in rows]))
    manifest.write(out)
    return 0


def cmd_benchmark_regression(args) -> int:
    cfg = load_config(args.config)
    if args.replicates is not None:
        cfg.replicates = args.replicates
    seed = _seed(args, cfg)
    out = _out_dir(args)
    if cfg.replicates == 0:
        warnings.warn("replicates=0: writing an empty table")
    manifest = Manifest("benchmark-regression", cfg, seed)
    rows, summary = benchmarks.benchmark_regression(cfg, seed, args.threads)
    labels = [f"{100 * q:g}th" for q in cfg.z_quantiles]
    header = ["method", "MSE", "COV"] + [f"L1_{k}" for k in labels]
    table = []
    if summary is not None:
        table.append(["GPT", summary.mse, summary.coverage]
                     + [summary.l1_at_quantiles[k] for k in labels])
        manifest.add_output(write_json(out / "metrics.json", summary.to_dict()))
    manifest.add_output(write_rows(out / "table2.csv", header, table))
    rep_rows = [[r["replicate"], r["seed"], r["metrics"].mse, r["metrics"].coverage]
                + [r["metrics"].l1_at_quantiles[k] for k in labels] for r in rows]
    manifest.add_output(write_rows(out / "replicates.csv",
                                   ["replicate", "seed", "MSE", "COV"] + [f"L1_{k}" for k in labels],
                                   rep_rows))
    for r in rows:
        manifest.add_chain(f"rep{r['replicate']}", r["manifest"])
    manifest.write(out)
    return 0


def prior_draw_cell(phi: float, c: float, index: int, seed: int, cfg: RunConfig, mean_values):
    """Draw transfer functions and residual scales for one hyperparameter pair."""
    rng = np.random.default_rng(np.random.SeedSequence(seed + index))
    grid = midpoint_grid(cfg.model.G)
    R = correlation(grid, c=c)
    R[np.diag_indices_from(R)] += cfg.model.nugget
    law = GaussianLaw(mean_values, R / phi, nugget=cfg.model.nugget / phi)
    curves = []
    for d in range(cfg.n_draws):
        mu = TransferFunction(grid, mvn_sample(law, rng))
        sigma = 1.0 / np.sqrt(rng.gamma(cfg.model.a_sigma, 1.0 / cfg.model.b_sigma))
        y = np.linspace(mu.values.min() - 6 * sigma, mu.values.max() + 6 * sigma, 1024)
        dens = eval_model_density(mu, sigma, y)
        curves.append((d, sigma, y, dens, float(np.trapezoid(dens, y))))
    return phi, c, curves


def cmd_prior_draws(args) -> int:
    cfg = load_config(args.config)
    if args.phi_values is not None:
        cfg.phi_values = args.phi_values
    if args.c_values is not None:
        cfg.c_values = args.c_values
    seed = _seed(args, cfg)
    out = _out_dir(args)
    grid = midpoint_grid(cfg.model.G)
    if args.elicit is not None:
        prior = inverse_cdf_mean(read_single_column(args.elicit), grid, source=str(args.elicit))
        mean_fn = prior.mean_function
    else:
        mean_fn = default_mean()
    manifest = Manifest("prior-draws", cfg, seed)
    manifest.data["mean_function"] = repr(mean_fn)
    cells = [(phi, c, i, seed, cfg, mean_fn(grid))
             for i, (phi, c) in enumerate((p, c) for p in cfg.phi_values for c in cfg.c_values)]
    results = benchmarks.run_cells(prior_draw_cell, cells, args.threads)
    long_rows, summary = [], []
    for phi, c, curves in results:
        for d, sigma, y, dens, integral in curves:
            summary.append((phi, c, d, sigma, integral))
            long_rows.extend((phi, c, d, sigma, yy, ff) for yy, ff in zip(y, dens))
    manifest.add_output(write_rows(out / "prior_draws.csv",
                                   ("phi", "c", "draw", "sigma", "y", "density"), long_rows))
    manifest.add_output(write_rows(out / "prior_summary.csv",
                                   ("phi", "c", "draw", "sigma", "integral"), summary))
    manifest.write(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gptdensity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=False):
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if threads:
            p.add_argument("--threads", type=int, default=1,
                           help="worker processes for independent chains")

    p = sub.add_parser("estimate-density", help="fit a GPT density to one column of data")
    p.add_argument("data", type=Path)
    common(p)
    p.set_defaults(func=cmd_estimate_density)

    p = sub.add_parser("regress", help="single-factor density regression")
    p.add_argument("train", type=Path, help="CSV with columns y, z (or z1..zp)")
    p.add_argument("test", type=Path, help="CSV with predictor columns and optional y")
    p.add_argument("--z", type=_float_list, help="predictor values for conditional curves")
    common(p)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("benchmark-mw", help="Marron-Wand L1 table")
    p.add_argument("--ids", type=_int_list)
    p.add_argument("--replicates", type=int)
    common(p, threads=True)
    p.set_defaults(func=cmd_benchmark_mw)

    p = sub.add_parser("benchmark-regression", help="density-regression MSE/coverage/L1 table")
    p.add_argument("--replicates", type=int)
    common(p, threads=True)
    p.set_defaults(func=cmd_benchmark_regression)

    p = sub.add_parser("prior-draws", help="densities drawn from the GPT prior")
    p.add_argument("--elicit", type=Path, help="single-column CSV of historical data")
    p.add_argument("--phi-values", type=_float_list)
    p.add_argument("--c-values", type=_float_list)
    common(p, threads=True)
    p.set_defaults(func=cmd_prior_draws)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except GPTError as err:
        print(f"gptdensity {args.command}: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
