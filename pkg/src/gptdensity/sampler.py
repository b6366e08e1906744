"""Blocked Gibbs sampler for the single-factor GPT model.

Every row ``i`` of the data carries a latent position ``x_i`` restricted to
the grid ``g_k = (k - 1/2) / G``. Each channel (the response, then each
predictor column) has its own transfer function, stored by its values at
the G grid points, plus a residual precision, a kernel precision ``phi``
and a length-scale rate ``C``. Because latent positions live on the grid,
the function values at the rows are just ``mu[x_i]``; rows sharing a grid
point share a value exactly, so no nugget is needed to make duplicated
positions well posed. The nugget only regularizes the grid Gram matrix.

One sweep runs

1. residual precisions (conjugate gamma),
2. latent positions (griddy Gibbs),
3. function values at the occupied grid points (conjugate normal),
5. kernel precisions (conjugate gamma),
6. length-scales (random-walk Metropolis on ``log C``),
4. function values at the unoccupied grid points (GP conditional).

Steps 3, 5 and 6 see the unoccupied values integrated out, so step 4 has
to come last for the sweep to leave the posterior invariant.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, special

from .centering import default_mean
from .exceptions import InvalidArgumentError, NumericalError
from .gp import (DEFAULT_NUGGET, GaussianLaw, GpHyper, MeanFunction, correlation,
                 gp_conditional, mvn_sample, stable_cholesky)
from .model import Dataset, midpoint_grid

logger = logging.getLogger(__name__)

SWEEP_ORDER = ("step1", "step2", "step3", "step5", "step6", "step4")
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class ModelConfig:
    """Hyperparameters and chain settings.

    Gamma priors use the shape/rate convention. ``a_*``/``b_*`` apply to the
    response channel and ``aa_*``/``bb_*`` to every predictor channel.
    """

    G: int = 75
    iters: int = 10_000
    burn_in: int = 1_000
    thin: int = 1
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    aa_sigma: float = 1.0
    bb_sigma: float = 1.0
    a_phi: float = 1.0
    b_phi: float = 1.0
    aa_phi: float = 1.0
    bb_phi: float = 1.0
    a_c: float = 1.0
    b_c: float = 0.04
    c_start: float = 25.0
    rw_scale: float = 0.25
    nugget: float = DEFAULT_NUGGET
    seed: Optional[int] = 0
    mean_y: Optional[MeanFunction] = field(default=None, repr=False)
    mean_z: Optional[MeanFunction] = field(default=None, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("G", "iters", "thin"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
        if int(self.burn_in) != self.burn_in or not 0 <= self.burn_in < self.iters:
            raise InvalidArgumentError(
                f"burn_in must be an integer in [0, iters), got {self.burn_in!r}")
        for name in ("a_sigma", "b_sigma", "aa_sigma", "bb_sigma", "a_phi", "b_phi",
                     "aa_phi", "bb_phi", "a_c", "b_c", "c_start"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {value!r}")
        if not (np.isfinite(self.rw_scale) and self.rw_scale >= 0):
            raise InvalidArgumentError(f"rw_scale must be nonnegative, got {self.rw_scale!r}")
        if not (np.isfinite(self.nugget) and self.nugget >= 0):
            raise InvalidArgumentError(f"nugget must be nonnegative, got {self.nugget!r}")

    @classmethod
    def elicited_preset(cls, **overrides) -> "ModelConfig":
        """Tight residual prior Ga(25, 1) for runs centered on an elicited mean."""
        settings = dict(a_sigma=25.0, b_sigma=1.0, c_start=25.0)
        settings.update(overrides)
        return cls(**settings)

    def echo(self) -> dict:
        """Plain-dict view for manifests (mean functions by name)."""
        out = {f.name: getattr(self, f.name) for f in fields(self)
               if f.name not in ("mean_y", "mean_z")}
        out["mean_y"] = repr(self.mean_y or default_mean())
        out["mean_z"] = repr(self.mean_z or default_mean())
        return out

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.iters, self.thin))


@dataclass
class ChannelState:
    """Current values for one channel (response or one predictor column).

    ``rows`` indexes the data rows where the channel is observed and
    ``obs`` holds the (standardized) observations there.
    """

    rows: np.ndarray
    obs: np.ndarray
    mean: MeanFunction
    mean_grid: np.ndarray
    a_tau: float
    b_tau: float
    a_phi: float
    b_phi: float
    mu: np.ndarray
    tau: float
    phi: float
    c: float
    accepted: int = 0
    proposed: int = 0
    _factor_key: tuple = field(default=(), repr=False)
    _factor: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return float(1.0 / np.sqrt(self.tau))

    def copy(self) -> "ChannelState":
        return ChannelState(
            self.rows, self.obs, self.mean, self.mean_grid, self.a_tau, self.b_tau,
            self.a_phi, self.b_phi, self.mu.copy(), self.tau, self.phi, self.c,
            self.accepted, self.proposed, self._factor_key, self._factor,
        )


@dataclass
class ChainState:
    """Latent grid indices for all N rows plus per-channel states.

    Channel 0 is the response; channels 1..p are predictor columns.
    """

    grid: np.ndarray
    x: np.ndarray
    channels: list
    n: int
    nugget: float = DEFAULT_NUGGET

    @property
    def G(self) -> int:
        return self.grid.size

    @property
    def positions(self) -> np.ndarray:
        return self.grid[self.x]

    def row_values(self, ch: int) -> np.ndarray:
        """Function values at the channel's observed rows."""
        chan = self.channels[ch]
        return chan.mu[self.x[chan.rows]]

    def copy(self) -> "ChainState":
        return ChainState(self.grid, self.x.copy(), [c.copy() for c in self.channels],
                          self.n, self.nugget)


@dataclass(frozen=True)
class PosteriorSample:
    """One retained snapshot. Arrays are indexed by channel first."""

    x: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray
    c: np.ndarray


class Trace(Sequence):
    """Retained samples of one chain, stored as stacked arrays.

    Behaves as a sequence of :class:`PosteriorSample`. ``manifest`` holds
    timings, acceptance rates and the config echo for the run.
    """

    def __init__(self, grid, n, x, mu, sigma, phi, c, log_joint=None, manifest=None):
        self.grid = np.asarray(grid, dtype=float)
        self.n = int(n)
        self.x = np.asarray(x)
        self.mu = np.asarray(mu, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.log_joint = None if log_joint is None else np.asarray(log_joint, dtype=float)
        self.manifest = manifest or {}

    @classmethod
    def from_samples(cls, samples: Sequence[PosteriorSample], grid, n) -> "Trace":
        if isinstance(samples, Trace):
            return samples
        samples = list(samples)
        if not samples:
            raise InvalidArgumentError("need at least one posterior sample")
        return cls(grid, n, *(np.stack([getattr(s, k) for s in samples])
                              for k in ("x", "mu", "sigma", "phi", "c")))

    def __len__(self):
        return self.mu.shape[0]

    def __getitem__(self, i):
        if isinstance(i, (slice, np.ndarray, list)):
            return Trace(self.grid, self.n, self.x[i], self.mu[i], self.sigma[i],
                         self.phi[i], self.c[i], manifest=self.manifest)
        return PosteriorSample(self.x[i], self.mu[i], self.sigma[i], self.phi[i], self.c[i])

    @property
    def n_channels(self) -> int:
        return self.mu.shape[1]

    @property
    def N(self) -> int:
        return self.x.shape[1]

    def concat(self, other: "Trace") -> "Trace":
        return Trace(self.grid, self.n, *(np.concatenate([getattr(self, k), getattr(other, k)])
                                           for k in ("x", "mu", "sigma", "phi", "c")))


def _rng(rng, cfg: Optional[ModelConfig] = None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None and cfg is not None:
        rng = cfg.seed
    return np.random.default_rng(rng)


def _channel_inputs(data: Dataset, cfg: ModelConfig):
    """(rows, obs, mean, a_tau, b_tau, a_phi, b_phi) for every channel."""
    mean_y = cfg.mean_y or default_mean()
    mean_z = cfg.mean_z or default_mean()
    out = [(np.arange(data.n), data.y, mean_y, cfg.a_sigma, cfg.b_sigma, cfg.a_phi, cfg.b_phi)]
    for j in range(data.p):
        out.append((np.arange(data.N), data.z[:, j], mean_z, cfg.aa_sigma, cfg.bb_sigma,
                    cfg.aa_phi, cfg.bb_phi))
    return out


def _ranks(values) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def _nearest_grid(u, grid) -> np.ndarray:
    return np.abs(np.subtract.outer(np.asarray(u, float), grid)).argmin(axis=1)


def init_chain(data: Dataset, cfg: ModelConfig, rng=None) -> ChainState:
    """Deterministic starting state.

    Response rows start at the grid point nearest ``rank(y_i) / (n + 1)``,
    prediction-only rows at the one nearest ``rank(z_i) / (N + 1)`` among
    all predictor values. Function values start at the prior mean,
    precisions at their prior means, ``C`` at ``cfg.c_start``.
    """
    grid = midpoint_grid(cfg.G)
    x = np.empty(data.N, dtype=np.intp)
    x[: data.n] = _nearest_grid(_ranks(data.y) / (data.n + 1), grid)
    if data.N > data.n:
        zr = _ranks(data.z[:, 0]) / (data.N + 1)
        x[data.n:] = _nearest_grid(zr[data.n:], grid)
    channels = []
    for rows, obs, mean, a_tau, b_tau, a_phi, b_phi in _channel_inputs(data, cfg):
        mean_grid = np.asarray(mean(grid), dtype=float)
        channels.append(ChannelState(
            rows=rows, obs=np.asarray(obs, dtype=float), mean=mean, mean_grid=mean_grid,
            a_tau=a_tau, b_tau=b_tau, a_phi=a_phi, b_phi=b_phi,
            mu=mean_grid.copy(), tau=a_tau / b_tau, phi=a_phi / b_phi, c=float(cfg.c_start),
        ))
    return ChainState(grid, x, channels, data.n, cfg.nugget)


def occupancy(state: ChainState, ch: int):
    """Occupied grid indices for a channel, with row counts and sums."""
    chan = state.channels[ch]
    idx, inverse = np.unique(state.x[chan.rows], return_inverse=True)
    counts = np.bincount(inverse, minlength=idx.size).astype(float)
    sums = np.bincount(inverse, weights=chan.obs, minlength=idx.size)
    return idx, counts, sums


def _grid_factor(state: ChainState, chan: ChannelState, idx: np.ndarray, c: float):
    """Lower factor of the unit-amplitude Gram ``R(idx, idx) + nugget I``."""
    pts = state.grid[idx]
    R = correlation(pts, c=c)
    R[np.diag_indices_from(R)] += state.nugget
    L, extra = stable_cholesky(R, state.nugget)
    if extra:
        logger.warning("grid Gram needed extra diagonal %.1e (C=%.4g)", extra, c)
    return L


def _cached_factor(state: ChainState, chan: ChannelState, idx: np.ndarray):
    key = (idx.tobytes(), chan.c)
    if chan._factor_key != key:
        chan._factor = _grid_factor(state, chan, idx, chan.c)
        chan._factor_key = key
    return chan._factor


# Step 1 -------------------------------------------------------------------

def residual_precision_posterior(chan: ChannelState, fitted: np.ndarray):
    """Gamma (shape, rate) for a channel's residual precision."""
    resid = chan.obs - fitted
    return chan.a_tau + 0.5 * resid.size, chan.b_tau + 0.5 * float(resid @ resid)


def step1_residual_precisions(state: ChainState, data=None, cfg=None, rng=None) -> ChainState:
    rng = _rng(rng, cfg)
    for ch, chan in enumerate(state.channels):
        shape, rate = residual_precision_posterior(chan, state.row_values(ch))
        chan.tau = float(rng.gamma(shape, 1.0 / rate))
    return state


# Step 2 -------------------------------------------------------------------

def latent_log_weights(state: ChainState) -> np.ndarray:
    """Unnormalized log ``P(x_i = g_k | rest)``, shape ``(N, G)``.

    Each observed entry of row ``i`` contributes its normal log-likelihood
    at the candidate grid value. The GP prior density of the stored grid
    values does not depend on where rows sit, so it adds no term here.
    """
    N = state.x.size
    logw = np.zeros((N, state.G))
    for chan in state.channels:
        d = chan.obs[:, None] - chan.mu[None, :]
        logw[chan.rows] += -0.5 * chan.tau * d * d + 0.5 * np.log(chan.tau) - 0.5 * _LOG_2PI
    return logw


def latent_probabilities(state: ChainState) -> np.ndarray:
    logw = latent_log_weights(state)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    total = w.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(total)) or np.any(total <= 0):
        raise NumericalError("latent weights vanished", rows=np.flatnonzero(~(total > 0)).tolist())
    return w / total


def step2_latents(state: ChainState, data=None, cfg=None, rng=None) -> ChainState:
    rng = _rng(rng, cfg)
    probs = latent_probabilities(state)
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None] * cum[:, -1:]
    state.x = np.minimum((cum < u).sum(axis=1), state.G - 1).astype(np.intp)
    return state


# Step 3 -------------------------------------------------------------------

def occupied_function_law(state: ChainState, ch: int):
    """Conditional law of the function at the occupied grid points.

    Returns ``(idx, law)``. With prior covariance ``K`` on those points and
    ``D = diag(sigma^2 / count)``, the mean is
    ``m + K (K + D)^-1 (ybar - m)`` and the covariance
    ``K - K (K + D)^-1 K``, the same law as
    ``N((D^-1 + K^-1)^-1 (D^-1 ybar + K^-1 m), (D^-1 + K^-1)^-1)``.
    """
    chan = state.channels[ch]
    idx, counts, sums = occupancy(state, ch)
    L = _cached_factor(state, chan, idx)
    K = (L @ L.T) / chan.phi
    m = chan.mean_grid[idx]
    ybar = sums / counts
    S = K.copy()
    S[np.diag_indices_from(S)] += 1.0 / (chan.tau * counts)
    S_factor = linalg.cho_factor(S, lower=True, check_finite=False)
    KSinv = linalg.cho_solve(S_factor, K, check_finite=False).T
    mean = m + KSinv @ (ybar - m)
    cov = K - KSinv @ K
    return idx, GaussianLaw(mean, 0.5 * (cov + cov.T), nugget=state.nugget / chan.phi)


def step3_function_at_rows(state: ChainState, data=None, cfg=None, rng=None) -> ChainState:
    rng = _rng(rng, cfg)
    for ch, chan in enumerate(state.channels):
        idx, law = occupied_function_law(state, ch)
        chan.mu[idx] = mvn_sample(law, rng)
    return state


# Step 4 -------------------------------------------------------------------

def unoccupied_function_law(state: ChainState, ch: int):
    """GP conditional law at the unoccupied grid points, or ``None``."""
    chan = state.channels[ch]
    idx, _, _ = occupancy(state, ch)
    free = np.setdiff1d(np.arange(state.G), idx, assume_unique=True)
    if free.size == 0:
        return free, None
    h = GpHyper(phi=chan.phi, c=chan.c, nugget=state.nugget / chan.phi)
    law = gp_conditional(state.grid[free], state.grid[idx], chan.mu[idx], chan.mean, h)
    return free, law


def step4_function_at_grid(state: ChainState, cfg=None, rng=None) -> ChainState:
    rng = _rng(rng, cfg)
    for ch, chan in enumerate(state.channels):
        free, law = unoccupied_function_law(state, ch)
        if law is not None:
            chan.mu[free] = mvn_sample(law, rng)
    return state


# Step 5 -------------------------------------------------------------------

def kernel_precision_posterior(state: ChainState, ch: int):
    """Gamma (shape, rate) for ``phi`` given the occupied function values.

    The quadratic form uses the unit-amplitude Gram, so it is free of
    ``phi`` and the update is conjugate.
    """
    chan = state.channels[ch]
    idx, _, _ = occupancy(state, ch)
    L = _cached_factor(state, chan, idx)
    r = linalg.solve_triangular(L, chan.mu[idx] - chan.mean_grid[idx], lower=True,
                                check_finite=False)
    return chan.a_phi + 0.5 * idx.size, chan.b_phi + 0.5 * float(r @ r)


def step5_kernel_precisions(state: ChainState, cfg=None, rng=None) -> ChainState:
    rng = _rng(rng, cfg)
    for ch, chan in enumerate(state.channels):
        shape, rate = kernel_precision_posterior(state, ch)
        chan.phi = float(rng.gamma(shape, 1.0 / rate))
    return state


# Step 6 -------------------------------------------------------------------

def lengthscale_log_target(values, mean_values, points, phi, c, a_c, b_c, nugget) -> float:
    """Log of ``N(values; mean, (R_c + nugget I) / phi) * Ga(c; a_c, b_c) * c``.

    The trailing ``c`` is the Jacobian of the move to ``log c``. Returns the
    factor used by the Metropolis ratio together with the Cholesky factor.
    """
    pts = np.asarray(points, dtype=float)
    R = correlation(pts, c=c)
    R[np.diag_indices_from(R)] += nugget
    L, _ = stable_cholesky(R, nugget)
    r = linalg.solve_triangular(L, np.asarray(values) - np.asarray(mean_values), lower=True,
                                check_finite=False)
    d = pts.size
    log_lik = (-0.5 * phi * float(r @ r) - np.log(np.diag(L)).sum()
               + 0.5 * d * np.log(phi) - 0.5 * d * _LOG_2PI)
    log_prior = a_c * np.log(b_c) - special.gammaln(a_c) + (a_c - 1.0) * np.log(c) - b_c * c
    return log_lik + log_prior + np.log(c), L


def lengthscale_log_ratio(state: ChainState, ch: int, c_new: float, cfg: ModelConfig) -> float:
    chan = state.channels[ch]
    idx, _, _ = occupancy(state, ch)
    args = (chan.mu[idx], chan.mean_grid[idx], state.grid[idx], chan.phi)
    new, _ = lengthscale_log_target(*args, c_new, cfg.a_c, cfg.b_c, state.nugget)
    old, _ = lengthscale_log_target(*args, chan.c, cfg.a_c, cfg.b_c, state.nugget)
    return new - old


def step6_lengthscales(state: ChainState, cfg: ModelConfig, rng=None) -> ChainState:
    rng = _rng(rng, cfg)
    for ch, chan in enumerate(state.channels):
        step = rng.normal(0.0, cfg.rw_scale) if cfg.rw_scale > 0 else 0.0
        c_new = float(chan.c * np.exp(step))
        idx, _, _ = occupancy(state, ch)
        args = (chan.mu[idx], chan.mean_grid[idx], state.grid[idx], chan.phi)
        new, L_new = lengthscale_log_target(*args, c_new, cfg.a_c, cfg.b_c, state.nugget)
        old, _ = lengthscale_log_target(*args, chan.c, cfg.a_c, cfg.b_c, state.nugget)
        chan.proposed += 1
        log_u = np.log(rng.random())
        if log_u < new - old:
            chan.c = c_new
            chan.accepted += 1
            chan._factor_key = (idx.tobytes(), c_new)
            chan._factor = L_new
    return state


# Diagnostics ---------------------------------------------------------------

def log_joint(state: ChainState, cfg: ModelConfig) -> float:
    """Log joint density of data and all unknowns (latent prior is constant)."""
    total = 0.0
    G = state.G
    for ch, chan in enumerate(state.channels):
        resid = chan.obs - state.row_values(ch)
        total += (-0.5 * chan.tau * float(resid @ resid)
                  + 0.5 * resid.size * (np.log(chan.tau) - _LOG_2PI))
        R = correlation(state.grid, c=chan.c)
        R[np.diag_indices_from(R)] += state.nugget
        L, _ = stable_cholesky(R, state.nugget)
        r = linalg.solve_triangular(L, chan.mu - chan.mean_grid, lower=True, check_finite=False)
        total += (-0.5 * chan.phi * float(r @ r) - np.log(np.diag(L)).sum()
                  + 0.5 * G * (np.log(chan.phi) - _LOG_2PI))
        for value, a, b in ((chan.tau, chan.a_tau, chan.b_tau), (chan.phi, chan.a_phi, chan.b_phi),
                            (chan.c, cfg.a_c, cfg.b_c)):
            total += a * np.log(b) - special.gammaln(a) + (a - 1) * np.log(value) - b * value
    return float(total)


def snapshot(state: ChainState) -> PosteriorSample:
    chans = state.channels
    return PosteriorSample(
        x=state.x.copy(),
        mu=np.stack([c.mu for c in chans]),
        sigma=np.array([c.sigma for c in chans]),
        phi=np.array([c.phi for c in chans]),
        c=np.array([c.c for c in chans]),
    )


def sweep(state: ChainState, cfg: ModelConfig, rng, timings: Optional[dict] = None) -> ChainState:
    """One full pass in SWEEP_ORDER."""
    steps = {
        "step1": lambda: step1_residual_precisions(state, None, cfg, rng),
        "step2": lambda: step2_latents(state, None, cfg, rng),
        "step3": lambda: step3_function_at_rows(state, None, cfg, rng),
        "step5": lambda: step5_kernel_precisions(state, cfg, rng),
        "step6": lambda: step6_lengthscales(state, cfg, rng),
        "step4": lambda: step4_function_at_grid(state, cfg, rng),
    }
    for name in SWEEP_ORDER:
        if timings is None:
            steps[name]()
        else:
            t0 = time.perf_counter()
            steps[name]()
            timings[name] += time.perf_counter() - t0
    return state


def run_chain(data: Dataset, cfg: ModelConfig, rng=None, state: Optional[ChainState] = None,
              track_log_joint: bool = False) -> Trace:
    """Run ``cfg.iters`` sweeps and keep every ``thin``-th post-burn-in state.

    ``data`` should already be standardized. The returned trace carries a
    run manifest with per-step wall times and Metropolis acceptance rates.
    """
    from . import __version__

    cfg.validate()
    rng = _rng(rng, cfg)
    if state is None:
        state = init_chain(data, cfg, rng)
    n_keep = cfg.n_retained
    n_ch = len(state.channels)
    xs = np.empty((n_keep, data.N), dtype=np.int16 if cfg.G < 2**15 else np.int32)
    mus = np.empty((n_keep, n_ch, cfg.G))
    sigmas = np.empty((n_keep, n_ch))
    phis = np.empty((n_keep, n_ch))
    cs = np.empty((n_keep, n_ch))
    lj = np.empty(cfg.iters) if track_log_joint else None
    timings = dict.fromkeys(SWEEP_ORDER, 0.0)
    started = time.time()
    kept = 0
    for it in range(cfg.iters):
        try:
            sweep(state, cfg, rng, timings)
        except NumericalError as err:
            err.diagnostics["sweep"] = it
            raise
        if lj is not None:
            lj[it] = log_joint(state, cfg)
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            xs[kept] = state.x
            for j, chan in enumerate(state.channels):
                mus[kept, j] = chan.mu
                sigmas[kept, j] = chan.sigma
                phis[kept, j] = chan.phi
                cs[kept, j] = chan.c
            kept += 1
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "sweep_order": list(SWEEP_ORDER),
        "step_seconds": {k: round(v, 6) for k, v in timings.items()},
        "wall_seconds": round(time.time() - started, 3),
        "lengthscale_acceptance": [c.accepted / max(c.proposed, 1) for c in state.channels],
        "n_retained": kept,
    }
    return Trace(state.grid, data.n, xs, mus, sigmas, phis, cs, log_joint=lj, manifest=manifest)


def predict_heldout(samples, row_index: int, rng=None, grid=None) -> np.ndarray:
    """One predictive draw ``N(mu_Y(x_k), sigma_Y^2)`` per retained sample.

    ``row_index`` is a 0-based row index and must point at a
    prediction-only row.
    """
    trace = samples if isinstance(samples, Trace) else Trace.from_samples(samples, grid, 0)
    if not trace.n <= row_index < trace.N:
        raise InvalidArgumentError(
            f"row {row_index} is not a prediction-only row (valid: {trace.n}..{trace.N - 1})")
    rng = _rng(rng)
    idx = trace.x[:, row_index].astype(np.intp)
    centers = trace.mu[np.arange(len(trace)), 0, idx]
    return centers + trace.sigma[:, 0] * rng.standard_normal(len(trace))
