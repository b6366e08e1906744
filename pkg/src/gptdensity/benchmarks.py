"""Simulation benchmarks: Marron-Wand density estimation and density regression.

Every (setting, replicate) cell is an independent chain seeded with
``seed + cell_index``; results are collected in cell order so tables do not
depend on the number of worker processes.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import estimation
from .io import RunConfig
from .model import (Dataset, conditional_truth, marron_wand, simulate_regression, split_rows,
                    standardize, with_prediction_rows)
from .sampler import run_chain

logger = logging.getLogger(__name__)

MW_L1_GRID = np.linspace(-8.0, 8.0, 1601)


def cell_rngs(seed: int, index: int):
    """Independent (data, chain) generators for one benchmark cell."""
    data_ss, chain_ss = np.random.SeedSequence(int(seed) + int(index)).spawn(2)
    return np.random.default_rng(data_ss), np.random.default_rng(chain_ss)


def run_cells(func, cells, threads: int = 1):
    if threads is None or threads <= 1 or len(cells) <= 1:
        return [func(*cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, *zip(*cells)))


def mw_replicate(mw_id: int, replicate: int, index: int, seed: int, cfg: RunConfig) -> dict:
    """Simulate ``cfg.n`` draws from one Marron-Wand density, fit, score L1."""
    data_rng, chain_rng = cell_rngs(seed, index)
    truth = marron_wand(mw_id)
    data = standardize(Dataset(truth.rvs(cfg.n, data_rng)))
    model = replace(cfg.model, seed=int(seed) + int(index))
    trace = run_chain(data, model, chain_rng)
    std = data.y_std

    def estimate(y):
        return estimation.marginal_density(trace, std.forward(y)) / std.scale

    l1 = estimation.l1_distance(estimate, truth.pdf, MW_L1_GRID)
    logger.info("MW%d replicate %d: L1 = %.4f", mw_id, replicate, l1)
    return {"id": mw_id, "replicate": replicate, "seed": int(seed) + int(index), "l1": l1,
            "manifest": trace.manifest}


def benchmark_mw(cfg: RunConfig, seed: int, threads: int = 1):
    """Returns (per-replicate rows, {id: mean L1})."""
    cells = []
    for i, mw_id in enumerate(cfg.ids):
        for r in range(cfg.replicates):
            cells.append((mw_id, r, i * cfg.replicates + r, seed, cfg))
    rows = run_cells(mw_replicate, cells, threads)
    means = {}
    for mw_id in cfg.ids:
        vals = [row["l1"] for row in rows if row["id"] == mw_id]
        if vals:
            means[mw_id] = float(np.mean(vals))
    return rows, means


def regression_l1(trace, data: Dataset, z_value: float, lam: float, noise_sd: float) -> float:
    """L1 between the estimated and true conditional densities at ``z_value``."""
    truth = conditional_truth(lam, noise_sd)
    std_y = data.y_std
    z_std = data.z_std[0].forward(z_value)
    y_obs = std_y.inverse(data.y)
    true_sd = float(noise_sd / (1 + np.exp(-z_value)))
    true_mean = float(lam * np.exp(-1 / (1 + np.exp(-z_value))))
    sd = float(np.std(y_obs, ddof=1))
    lo = min(true_mean - 8 * true_sd, y_obs.min() - 4 * sd)
    hi = max(true_mean + 8 * true_sd, y_obs.max() + 4 * sd)
    grid = np.linspace(lo, hi, 1201)

    def estimate(y):
        return estimation.conditional_density(trace, std_y.forward(y), [z_std]) / std_y.scale

    return estimation.l1_distance(estimate, lambda y: truth(y, z_value), grid)


def regression_replicate(replicate: int, index: int, seed: int, cfg: RunConfig) -> dict:
    """One train/test split of the heteroscedastic regression design."""
    data_rng, chain_rng = cell_rngs(seed, index)
    full = simulate_regression(cfg.n_total, cfg.lam, cfg.noise_sd, seed=data_rng)
    train, test = split_rows(full, cfg.n_train)
    data = standardize(with_prediction_rows(train, test.z))
    model = replace(cfg.model, seed=int(seed) + int(index))
    trace = run_chain(data, model, chain_rng)
    std = data.y_std
    draws = std.inverse(estimation.heldout_draws(trace, chain_rng))
    means = std.inverse(estimation.heldout_means(trace))
    metrics = estimation.mse_coverage(draws, test.y, cfg.level, means=means)
    z_train = train.z[:, 0]
    for q in cfg.z_quantiles:
        label = f"{100 * q:g}th"
        metrics.l1_at_quantiles[label] = regression_l1(
            trace, data, float(np.quantile(z_train, q)), cfg.lam, cfg.noise_sd)
    logger.info("regression replicate %d: %s", replicate, metrics)
    return {"replicate": replicate, "seed": int(seed) + int(index), "metrics": metrics,
            "manifest": trace.manifest}


def benchmark_regression(cfg: RunConfig, seed: int, threads: int = 1):
    """Returns (per-replicate rows, averaged RegressionMetrics)."""
    cells = [(r, r, seed, cfg) for r in range(cfg.replicates)]
    rows = run_cells(regression_replicate, cells, threads)
    if not rows:
        return rows, None
    labels = list(rows[0]["metrics"].l1_at_quantiles)
    summary = estimation.RegressionMetrics(
        mse=float(np.mean([r["metrics"].mse for r in rows])),
        coverage=float(np.mean([r["metrics"].coverage for r in rows])),
        l1_at_quantiles={k: float(np.mean([r["metrics"].l1_at_quantiles[k] for r in rows]))
                         for k in labels},
    )
    return rows, summary
