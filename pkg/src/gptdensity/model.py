"""Core model objects: datasets, transfer functions, reference densities.

The GPT density induced by a transfer function ``mu`` on ``[0, 1]`` and a
Gaussian residual scale ``sigma`` is

    f(y) = int_0^1 N(y; mu(x), sigma^2) dx,

approximated here by the equal-weight average over the stored grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .exceptions import DegenerateDataError, InvalidArgumentError

GRID_CLAMP = 1e-6
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def midpoint_grid(G: int) -> np.ndarray:
    """Evenly spaced latent grid ``(k - 1/2) / G`` for ``k = 1..G``."""
    if G < 1:
        raise InvalidArgumentError(f"grid size must be >= 1, got {G}")
    return (np.arange(G) + 0.5) / G


def norm_ppf(u) -> np.ndarray:
    """Standard normal quantile, with ``u`` clamped into ``(1e-6, 1 - 1e-6)``."""
    u = np.clip(np.asarray(u, dtype=float), GRID_CLAMP, 1.0 - GRID_CLAMP)
    return special.ndtri(u)


def norm_logpdf(y, loc=0.0, scale=1.0):
    z = (np.asarray(y, dtype=float) - loc) / scale
    return -0.5 * z * z - np.log(scale) - _LOG_SQRT_2PI


def norm_pdf(y, loc=0.0, scale=1.0):
    return np.exp(norm_logpdf(y, loc, scale))


@dataclass(frozen=True)
class Standardization:
    """Affine map ``v -> (v - loc) / scale`` for one data channel."""

    loc: float
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.loc) and np.isfinite(self.scale)) or self.scale <= 0:
            raise DegenerateDataError(
                f"standardization needs finite loc and positive scale, got "
                f"loc={self.loc}, scale={self.scale}"
            )

    @classmethod
    def identity(cls) -> "Standardization":
        return cls(0.0, 1.0)

    @classmethod
    def from_values(cls, values) -> "Standardization":
        values = np.asarray(values, dtype=float)
        if values.size < 2:
            raise DegenerateDataError("need at least 2 values to estimate a scale")
        sd = float(np.std(values, ddof=1))
        if not sd > 0:
            raise DegenerateDataError("channel has zero variance")
        return cls(float(np.mean(values)), sd)

    def forward(self, values):
        return (np.asarray(values, dtype=float) - self.loc) / self.scale

    def inverse(self, values):
        return np.asarray(values, dtype=float) * self.scale + self.loc


@dataclass
class Dataset:
    """Responses ``y`` (n,) with optional predictors ``z`` (N, p), N >= n.

    Rows of ``z`` beyond ``n`` are prediction-only: their response is
    unknown and is predicted by the joint model.
    """

    y: np.ndarray
    z: Optional[np.ndarray] = None
    y_std: Standardization = field(default_factory=Standardization.identity)
    z_std: tuple = ()

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.y.size < 1:
            raise InvalidArgumentError("dataset needs at least one response")
        if not np.all(np.isfinite(self.y)):
            raise InvalidArgumentError("responses must be finite")
        if self.z is not None:
            z = np.asarray(self.z, dtype=float)
            if z.ndim == 1:
                z = z[:, None]
            if z.ndim != 2 or z.shape[0] < self.y.size:
                raise InvalidArgumentError(
                    f"predictor matrix must have at least n={self.y.size} rows, "
                    f"got shape {z.shape}"
                )
            if not np.all(np.isfinite(z)):
                raise InvalidArgumentError("predictors must be finite")
            self.z = z
            if not self.z_std:
                self.z_std = tuple(Standardization.identity() for _ in range(z.shape[1]))
        else:
            self.z_std = ()

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def N(self) -> int:
        return self.n if self.z is None else self.z.shape[0]

    @property
    def p(self) -> int:
        return 0 if self.z is None else self.z.shape[1]

    def training_part(self) -> "Dataset":
        """Drop prediction-only rows."""
        z = None if self.z is None else self.z[: self.n]
        return Dataset(self.y, z, self.y_std, self.z_std)


def standardize(data: Dataset) -> Dataset:
    """Center and scale every channel to mean 0 and sample sd 1.

    Predictor channels are standardized over all N rows. Returns a new
    dataset recording the maps so estimates can be sent back.
    """
    if data.n < 2:
        raise DegenerateDataError("standardization needs n >= 2")
    raw_y = data.y_std.inverse(data.y)
    y_std = Standardization.from_values(raw_y)
    z = z_std = None
    if data.z is not None:
        raw_z = np.column_stack([s.inverse(col) for s, col in zip(data.z_std, data.z.T)])
        z_std = tuple(Standardization.from_values(col) for col in raw_z.T)
        z = np.column_stack([s.forward(col) for s, col in zip(z_std, raw_z.T)])
    return Dataset(y_std.forward(raw_y), z, y_std, z_std or ())


@dataclass
class TransferFunction:
    """Values of the transfer function ``mu`` at latent grid points in (0, 1)."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.grid.shape != self.values.shape or self.grid.size == 0:
            raise InvalidArgumentError("grid and values must be nonempty and equal length")
        if not (np.all(self.grid > 0) and np.all(self.grid < 1)):
            raise InvalidArgumentError("grid points must lie in the open interval (0, 1)")
        if np.any(np.diff(self.grid) <= 0):
            raise InvalidArgumentError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("transfer function values must be finite")

    @classmethod
    def from_callable(cls, func, G: int) -> "TransferFunction":
        grid = midpoint_grid(G)
        return cls(grid, np.broadcast_to(func(grid), grid.shape).astype(float))


def eval_model_density(mu: TransferFunction, sigma: float, y):
    """GPT density ``(1/G) sum_k N(y; mu(g_k), sigma^2)`` at ``y``.

    ``y`` may be a scalar or an array; the result has the same shape.
    """
    sigma = float(sigma)
    if not (np.isfinite(sigma) and sigma > 0):
        raise InvalidArgumentError(f"sigma must be positive and finite, got {sigma}")
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise InvalidArgumentError("y must be finite")
    flat = y_arr.reshape(-1)
    out = np.empty(flat.shape)
    # chunk to bound the (len(y), G) temporary
    step = max(1, 2_000_000 // mu.values.size)
    for start in range(0, flat.size, step):
        block = flat[start:start + step, None]
        out[start:start + step] = norm_pdf(block, mu.values[None, :], sigma).mean(axis=1)
    return out.reshape(y_arr.shape) if y_arr.ndim else float(out[0])


@dataclass(frozen=True)
class MixtureDensity:
    """Finite Gaussian mixture with ``pdf``, ``cdf``, ``ppf`` and ``rvs``."""

    weights: tuple
    means: tuple
    sds: tuple
    name: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not (len(self.weights) == len(self.means) == len(self.sds) >= 1):
            raise InvalidArgumentError("mixture parameter lists must have equal nonzero length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("mixture weights must be >= 0 and sum to 1")
        if np.any(np.asarray(self.sds, dtype=float) <= 0):
            raise InvalidArgumentError("component sds must be positive")

    @property
    def components(self):
        return list(zip(self.weights, self.means, self.sds))

    def _arrays(self):
        return (np.asarray(self.weights, float), np.asarray(self.means, float),
                np.asarray(self.sds, float))

    def pdf(self, y):
        w, m, s = self._arrays()
        y = np.asarray(y, dtype=float)
        return (w * norm_pdf(y[..., None], m, s)).sum(axis=-1)

    def cdf(self, y):
        w, m, s = self._arrays()
        y = np.asarray(y, dtype=float)
        return (w * special.ndtr((y[..., None] - m) / s)).sum(axis=-1)

    def mean(self) -> float:
        w, m, _ = self._arrays()
        return float(w @ m)

    def std(self) -> float:
        w, m, s = self._arrays()
        second = w @ (s**2 + m**2)
        return float(np.sqrt(second - (w @ m) ** 2))

    def ppf(self, u, tol=1e-12):
        """Quantile function by vectorized bisection on the cdf."""
        u = np.asarray(u, dtype=float)
        _, m, s = self._arrays()
        lo = np.full(u.shape, m.min() - 40 * s.max())
        hi = np.full(u.shape, m.max() + 40 * s.max())
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo, initial=0.0) < tol:
                break
        return 0.5 * (lo + hi)

    def rvs(self, size, rng=None):
        rng = np.random.default_rng(rng)
        w, m, s = self._arrays()
        comp = rng.choice(len(w), size=size, p=w)
        return rng.normal(m[comp], s[comp])


# Marron & Wand (1992), Table 1 parameterizations of the test densities used here.
_MARRON_WAND = {
    2: ("skewed unimodal",
        (1 / 5, 1 / 5, 3 / 5), (0.0, 1 / 2, 13 / 12), (1.0, 2 / 3, 5 / 9)),
    6: ("bimodal",
        (1 / 2, 1 / 2), (-1.0, 1.0), (2 / 3, 2 / 3)),
    8: ("asymmetric bimodal",
        (3 / 4, 1 / 4), (0.0, 3 / 2), (1.0, 1 / 3)),
    9: ("trimodal",
        (9 / 20, 9 / 20, 1 / 10), (-6 / 5, 6 / 5, 0.0), (3 / 5, 3 / 5, 1 / 4)),
}

MARRON_WAND_IDS = tuple(sorted(_MARRON_WAND))


def marron_wand(id: int) -> MixtureDensity:
    """One of the supported Marron-Wand test densities (ids 2, 6, 8, 9)."""
    try:
        name, w, m, s = _MARRON_WAND[int(id)]
    except (KeyError, TypeError, ValueError):
        raise InvalidArgumentError(
            f"unsupported Marron-Wand id {id!r}; choose from {MARRON_WAND_IDS}"
        ) from None
    # 1/5 + 1/5 + 3/5 is not exactly 1 in floating point
    w = tuple(np.asarray(w) / np.sum(w))
    return MixtureDensity(w, m, s, name=f"MW{id} ({name})")


def logistic(z):
    return special.expit(z)


def regression_mean(z, lam: float):
    """Conditional mean ``lam * exp(-logistic(z))`` of the simulation design."""
    return lam * np.exp(-logistic(z))


def regression_sd(z, sigma: float):
    """Conditional sd ``logistic(z) * sigma`` of the simulation design."""
    return logistic(z) * sigma


def simulate_regression(n: int, lam: float = 3.0, sigma: float = 2.0, seed=None) -> Dataset:
    """Draw ``n`` pairs from the heteroscedastic density-regression design.

    ``z ~ MW9`` and ``y = lam * exp(-l(z)) + l(z) * eps`` with ``l`` the
    logistic function and ``eps ~ N(0, sigma^2)``.
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    if not np.isfinite(lam):
        raise InvalidArgumentError("lambda must be finite")
    if not (np.isfinite(sigma) and sigma >= 0):
        raise InvalidArgumentError("sigma must be finite and nonnegative")
    rng = np.random.default_rng(seed)
    z = marron_wand(9).rvs(int(n), rng)
    y = regression_mean(z, lam) + logistic(z) * rng.normal(0.0, 1.0, int(n)) * sigma
    return Dataset(y, z[:, None])


def conditional_truth(lam: float, sigma: float):
    """Callable ``(y, z) -> true conditional density`` for the regression design."""
    def density(y, z):
        return norm_pdf(y, regression_mean(z, lam), regression_sd(z, sigma))
    return density


def split_rows(data: Dataset, n_train: int) -> tuple:
    """Split a complete dataset into training rows and held-out rows."""
    if not 0 < n_train < data.n:
        raise InvalidArgumentError("n_train must be between 1 and n - 1")
    train = Dataset(data.y[:n_train], None if data.z is None else data.z[:n_train])
    test = Dataset(data.y[n_train:], None if data.z is None else data.z[n_train:])
    return train, test


def with_prediction_rows(train: Dataset, z_new: Sequence) -> Dataset:
    """Append prediction-only predictor rows to a training set."""
    if train.z is None:
        raise InvalidArgumentError("training data has no predictors")
    z_new = np.asarray(z_new, dtype=float)
    if z_new.ndim == 1:
        z_new = z_new[:, None]
    z = np.vstack([train.z[: train.n], z_new]) if z_new.size else train.z[: train.n]
    return replace(train, z=z)
