"""Posterior summaries and evaluation metrics.

Density estimates are Rao-Blackwellized: each retained sample contributes
its exact grid-mixture density, and curves are averaged over samples.
Credible bands are pointwise equal-tailed quantiles across samples.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import special

from .exceptions import InvalidArgumentError, NumericalError
from .model import Standardization, norm_logpdf
from .sampler import Trace

_CHUNK = 4_000_000


@dataclass
class DensityEstimate:
    """Pointwise posterior mean density with lower/upper bands."""

    y_grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    scale: str = "standardized"
    level: float = 0.9

    def integral(self) -> float:
        return float(np.trapezoid(self.mean, self.y_grid))

    def as_columns(self) -> dict:
        return {"y": self.y_grid, "mean": self.mean, "lower": self.lower, "upper": self.upper}


@dataclass
class RegressionMetrics:
    mse: float
    coverage: float
    l1_at_quantiles: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _trace(samples, grid=None) -> Trace:
    if isinstance(samples, Trace):
        if len(samples) == 0:
            raise InvalidArgumentError("need at least one posterior sample")
        return samples
    if grid is None:
        raise InvalidArgumentError("pass grid= when samples is a plain list")
    return Trace.from_samples(samples, grid, 0)


def _bands(per_sample: np.ndarray, level: float):
    if not 0 < level < 1:
        raise InvalidArgumentError(f"level must be in (0, 1), got {level}")
    alpha = 0.5 * (1 - level)
    lower, upper = np.quantile(per_sample, [alpha, 1 - alpha], axis=0)
    mean = per_sample.mean(axis=0)
    # quantile interpolation can put a band a rounding error past the mean
    return mean, np.minimum(lower, mean), np.maximum(upper, mean)


def _mixture_pdf(y, centers, sigma, weights=None):
    """``sum_k w_k N(y; centers_k, sigma^2)`` for every sample, shape (S, M).

    ``y`` is (M,), ``centers`` (S, G), ``sigma`` (S,); ``weights`` (S, G)
    defaults to ``1/G``. Far tails underflow to 0, which is harmless for
    densities; normalizing constants are handled by the callers in log space.
    """
    S, G = centers.shape
    out = np.empty((S, y.size))
    step = max(1, _CHUNK // max(1, y.size * G))
    for s in range(0, S, step):
        c = centers[s:s + step, None, :]
        sd = sigma[s:s + step, None, None]
        dens = np.exp(norm_logpdf(y[None, :, None], c, sd))
        if weights is None:
            out[s:s + step] = dens.mean(axis=2)
        else:
            out[s:s + step] = np.einsum("smk,sk->sm", dens, weights[s:s + step])
    return out


def sample_marginal_densities(samples, y, grid=None) -> np.ndarray:
    """Per-sample marginal response density, shape ``(S, len(y))``."""
    tr = _trace(samples, grid)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return _mixture_pdf(y, tr.mu[:, 0, :], tr.sigma[:, 0])


def marginal_density(samples, y, grid=None):
    """Posterior mean of ``(1/G) sum_k N(y; mu_Y(g_k), sigma_Y^2)``."""
    y_arr = np.asarray(y, dtype=float)
    out = sample_marginal_densities(samples, y_arr.reshape(-1), grid).mean(axis=0)
    return out.reshape(y_arr.shape) if y_arr.ndim else float(out[0])


def marginal_density_estimate(samples, y_grid, level: float = 0.9, grid=None) -> DensityEstimate:
    y_grid = np.asarray(y_grid, dtype=float)
    mean, lo, hi = _bands(sample_marginal_densities(samples, y_grid, grid), level)
    return DensityEstimate(y_grid, mean, lo, hi, level=level)


def predictor_log_weights(tr: Trace, z) -> np.ndarray:
    """Normalized log weights ``log w_k(z)`` of the grid points, shape (S, G).

    ``w_k(z)`` is proportional to the product over predictor channels of
    ``N(z_j; mu_Zj(g_k), sigma_Zj^2)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    p = tr.n_channels - 1
    if p < 1:
        raise InvalidArgumentError("conditional density needs at least one predictor channel")
    if z.size != p:
        raise InvalidArgumentError(f"expected {p} predictor values, got {z.size}")
    logw = np.zeros((len(tr), tr.grid.size))
    for j in range(p):
        logw += norm_logpdf(z[j], tr.mu[:, j + 1, :], tr.sigma[:, j + 1, None])
    norm = special.logsumexp(logw, axis=1, keepdims=True)
    dead = ~np.isfinite(norm[:, 0])
    if np.all(dead):
        raise NumericalError("every sample has a zero predictor density at z", z=z.tolist())
    logw = np.where(dead[:, None], -np.inf, logw - np.where(dead[:, None], 0.0, norm))
    return logw


def sample_conditional_densities(samples, y, z, grid=None, return_dead: bool = False):
    """Per-sample conditional density ``f(y | z)``, shape ``(S, len(y))``.

    Samples whose predictor density underflows to exactly zero at ``z``
    cannot contribute; their rows are dropped and, with
    ``return_dead=True``, their count is returned alongside.
    """
    tr = _trace(samples, grid)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    logw = predictor_log_weights(tr, z)
    dead = ~np.isfinite(logw).any(axis=1)
    logw = logw[~dead]
    centers = tr.mu[~dead, 0, :]
    sigma = tr.sigma[~dead, 0]
    out = _mixture_pdf(y, centers, sigma, np.exp(logw))
    return (out, int(dead.sum())) if return_dead else out


def conditional_density(samples, y, z, grid=None):
    """Posterior mean conditional density of the response at ``y`` given ``z``."""
    y_arr = np.asarray(y, dtype=float)
    out = sample_conditional_densities(samples, y_arr.reshape(-1), z, grid).mean(axis=0)
    return out.reshape(y_arr.shape) if y_arr.ndim else float(out[0])


def conditional_density_estimate(samples, y_grid, z, level: float = 0.9,
                                 grid=None) -> DensityEstimate:
    y_grid = np.asarray(y_grid, dtype=float)
    per_sample = sample_conditional_densities(samples, y_grid, z, grid)
    mean, lo, hi = _bands(per_sample, level)
    return DensityEstimate(y_grid, mean, lo, hi, level=level)


def conditional_moments(samples, z, grid=None):
    """Per-sample mean and sd of the response given ``z``, each shape (S,)."""
    tr = _trace(samples, grid)
    w = np.exp(predictor_log_weights(tr, z))
    muy = tr.mu[:, 0, :]
    m1 = (w * muy).sum(axis=1)
    m2 = (w * muy**2).sum(axis=1)
    var = tr.sigma[:, 0] ** 2 + np.maximum(m2 - m1**2, 0.0)
    return m1, np.sqrt(var)


def tail_probability(samples, T: float, z, level: float = 0.9, grid=None,
                     n_mesh: int = 2049):
    """Posterior mean and band of ``P(Y <= T | z)``.

    Each sample's conditional density is integrated by the trapezoid rule
    from its mean minus 8 sd up to ``T``.
    """
    tr = _trace(samples, grid)
    T = float(T)
    m1, sd = conditional_moments(tr, z)
    lo = m1 - 8.0 * sd
    t = np.linspace(0.0, 1.0, n_mesh)
    probs = np.zeros(len(tr))
    live = T > lo
    if np.any(live):
        sub = tr[np.flatnonzero(live)] if not np.all(live) else tr
        lo_l = lo[live]
        mesh = lo_l[:, None] + (T - lo_l)[:, None] * t[None, :]
        w = np.exp(predictor_log_weights(sub, z))
        dens = np.empty(mesh.shape)
        G = tr.grid.size
        step = max(1, _CHUNK // (n_mesh * G))
        for s in range(0, mesh.shape[0], step):
            comp = np.exp(norm_logpdf(mesh[s:s + step, :, None], sub.mu[s:s + step, None, 0, :],
                                      sub.sigma[s:s + step, None, None, 0]))
            dens[s:s + step] = np.einsum("smk,sk->sm", comp, w[s:s + step])
        probs[live] = np.clip(np.trapezoid(dens, mesh, axis=1), 0.0, 1.0)
    mean, lower, upper = _bands(probs[:, None], level)
    return float(mean[0]), float(lower[0]), float(upper[0])


def l1_distance(f: Callable, g: Callable, grid) -> float:
    """Trapezoid approximation of ``int |f - g|`` over ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("grid must be 1-D and strictly increasing")
    fv = np.asarray(f(grid), dtype=float)
    gv = np.asarray(g(grid), dtype=float)
    if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
        raise NumericalError("density values are not finite on the grid")
    return float(np.trapezoid(np.abs(fv - gv), grid))


def heldout_draws(samples, rng=None, grid=None) -> np.ndarray:
    """Predictive draws for every prediction-only row, shape (N - n, S)."""
    tr = _trace(samples, grid)
    rng = np.random.default_rng(rng)
    rows = np.arange(tr.n, tr.N)
    idx = tr.x[:, rows].astype(np.intp)
    centers = np.take_along_axis(tr.mu[:, 0, :], idx, axis=1)
    draws = centers + tr.sigma[:, 0, None] * rng.standard_normal(centers.shape)
    return draws.T


def heldout_means(samples, grid=None) -> np.ndarray:
    """Posterior predictive means ``E[mu_Y(x_k)]`` of the prediction-only rows."""
    tr = _trace(samples, grid)
    idx = tr.x[:, tr.n:].astype(np.intp)
    return np.take_along_axis(tr.mu[:, 0, :], idx, axis=1).mean(axis=0)


def mse_coverage(draws, truth, level: float = 0.95, means=None) -> RegressionMetrics:
    """MSE of predictive means and coverage of equal-tailed predictive intervals.

    ``draws`` is (n_test, S). ``means`` overrides the per-row draw averages
    (e.g. with Rao-Blackwellized predictive means).
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if truth.size == 0:
        raise InvalidArgumentError("held-out set is empty")
    if draws.shape[0] != truth.size:
        raise InvalidArgumentError("draws must have one row per held-out value")
    if not 0 < level < 1:
        raise InvalidArgumentError(f"level must be in (0, 1), got {level}")
    pred = draws.mean(axis=1) if means is None else np.asarray(means, dtype=float)
    alpha = 0.5 * (1 - level)
    lo, hi = np.quantile(draws, [alpha, 1 - alpha], axis=1)
    covered = (truth >= lo) & (truth <= hi)
    return RegressionMetrics(float(np.mean((pred - truth) ** 2)), float(covered.mean()))


def destandardize_density(est: DensityEstimate, std: Standardization) -> DensityEstimate:
    """Map a density on the standardized scale back: ``f(y) = f_std((y - m) / s) / s``."""
    if est.scale == "original":
        return est
    return replace(
        est,
        y_grid=std.inverse(est.y_grid),
        mean=est.mean / std.scale,
        lower=est.lower / std.scale,
        upper=est.upper / std.scale,
        scale="original",
    )


def default_y_grid(values, size: int = 512, pad_sd: float = 3.0) -> np.ndarray:
    """Evaluation grid spanning the observed range padded by ``pad_sd`` sds."""
    values = np.asarray(values, dtype=float)
    sd = np.std(values, ddof=1) if values.size > 1 else 1.0
    return np.linspace(values.min() - pad_sd * sd, values.max() + pad_sd * sd, size)
