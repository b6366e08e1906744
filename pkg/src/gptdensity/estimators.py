"""scikit-learn style front ends for the GPT sampler."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import estimation
from .gp import DEFAULT_NUGGET, MeanFunction
from .model import Dataset, standardize
from .sampler import ModelConfig, run_chain


class _GPTBase(BaseEstimator):
    def __init__(self, n_grid=75, n_iter=10_000, burn_in=1_000, thin=1, a_sigma=1.0,
                 b_sigma=1.0, a_phi=1.0, b_phi=1.0, a_c=1.0, b_c=0.04, c_start=25.0,
                 rw_scale=0.25, nugget=DEFAULT_NUGGET, mean_function=None, random_state=0):
        self.n_grid = n_grid
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.a_sigma = a_sigma
        self.b_sigma = b_sigma
        self.a_phi = a_phi
        self.b_phi = b_phi
        self.a_c = a_c
        self.b_c = b_c
        self.c_start = c_start
        self.rw_scale = rw_scale
        self.nugget = nugget
        self.mean_function = mean_function
        self.random_state = random_state

    def _config(self, **extra) -> ModelConfig:
        seed = self.random_state
        if seed is not None and not isinstance(seed, (int, np.integer)):
            raise TypeError("random_state must be an int or None")
        return ModelConfig(
            G=self.n_grid, iters=self.n_iter, burn_in=self.burn_in, thin=self.thin,
            a_sigma=self.a_sigma, b_sigma=self.b_sigma, a_phi=self.a_phi, b_phi=self.b_phi,
            a_c=self.a_c, b_c=self.b_c, c_start=self.c_start, rw_scale=self.rw_scale,
            nugget=self.nugget, seed=seed, mean_y=self.mean_function, **extra,
        )

    @property
    def manifest_(self) -> dict:
        check_is_fitted(self, "trace_")
        return self.trace_.manifest


class GPTDensity(DensityMixin, _GPTBase):
    """Bayesian density estimator with a GPT prior.

    Data are standardized before sampling and estimates are mapped back,
    so ``mean_function`` (when given) acts on the standardized scale.

    Attributes
    ----------
    trace_ : Trace
        Retained posterior samples (standardized scale).
    data_ : Dataset
        The standardized training data with its standardization maps.
    """

    def fit(self, X, y=None):
        values = check_array(X, ensure_2d=False, dtype=float).reshape(-1)
        self.data_ = standardize(Dataset(values))
        self.config_ = self._config()
        self.trace_ = run_chain(self.data_, self.config_)
        self.n_features_in_ = 1
        return self

    def _std_points(self, X):
        check_is_fitted(self, "trace_")
        values = check_array(X, ensure_2d=False, dtype=float).reshape(-1)
        return self.data_.y_std.forward(values)

    def density(self, X) -> np.ndarray:
        """Posterior mean density at ``X`` on the original scale."""
        points = self._std_points(X)
        return estimation.marginal_density(self.trace_, points) / self.data_.y_std.scale

    def score_samples(self, X) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.density(X))

    def score(self, X, y=None) -> float:
        return float(self.score_samples(X).sum())

    def density_estimate(self, y_grid=None, level: float = 0.9, size: int = 512):
        """Mean curve and pointwise credible band, on the original scale."""
        check_is_fitted(self, "trace_")
        if y_grid is None:
            y_std = estimation.default_y_grid(self.data_.y, size=size)
        else:
            y_std = self.data_.y_std.forward(np.asarray(y_grid, dtype=float))
        est = estimation.marginal_density_estimate(self.trace_, y_std, level)
        return estimation.destandardize_density(est, self.data_.y_std)

    def sample(self, n_samples: int = 1, random_state=None) -> np.ndarray:
        """Draws from the posterior predictive density."""
        check_is_fitted(self, "trace_")
        rng = np.random.default_rng(random_state)
        tr = self.trace_
        s = rng.integers(0, len(tr), n_samples)
        k = rng.integers(0, tr.grid.size, n_samples)
        draws = tr.mu[s, 0, k] + tr.sigma[s, 0] * rng.standard_normal(n_samples)
        return self.data_.y_std.inverse(draws)


class GPTDensityRegressor(RegressorMixin, _GPTBase):
    """Single-factor GPT density regression.

    The response and every predictor column share one latent factor.
    Rows passed as ``X_predict`` to :meth:`fit` join the chain as
    prediction-only rows; :meth:`predictive_draws` returns their
    posterior predictive draws. :meth:`predict` on arbitrary ``X`` uses
    the conditional mean implied by the fitted grid mixture.
    """

    def __init__(self, n_grid=75, n_iter=10_000, burn_in=1_000, thin=1, a_sigma=1.0,
                 b_sigma=1.0, aa_sigma=1.0, bb_sigma=1.0, a_phi=1.0, b_phi=1.0, aa_phi=1.0,
                 bb_phi=1.0, a_c=1.0, b_c=0.04, c_start=25.0, rw_scale=0.25,
                 nugget=DEFAULT_NUGGET, mean_function=None, mean_function_z=None,
                 random_state=0):
        super().__init__(n_grid=n_grid, n_iter=n_iter, burn_in=burn_in, thin=thin,
                         a_sigma=a_sigma, b_sigma=b_sigma, a_phi=a_phi, b_phi=b_phi,
                         a_c=a_c, b_c=b_c, c_start=c_start, rw_scale=rw_scale,
                         nugget=nugget, mean_function=mean_function,
                         random_state=random_state)
        self.aa_sigma = aa_sigma
        self.bb_sigma = bb_sigma
        self.aa_phi = aa_phi
        self.bb_phi = bb_phi
        self.mean_function_z = mean_function_z

    def fit(self, X, y, X_predict=None):
        X = check_array(X, dtype=float)
        y = check_array(y, ensure_2d=False, dtype=float).reshape(-1)
        if X.shape[0] != y.size:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size}")
        z = X
        if X_predict is not None:
            X_predict = check_array(X_predict, dtype=float, ensure_min_samples=0)
            if X_predict.shape[1] != X.shape[1]:
                raise ValueError("X_predict must have the same columns as X")
            z = np.vstack([X, X_predict])
        self.data_ = standardize(Dataset(y, z))
        self.config_ = self._config(aa_sigma=self.aa_sigma, bb_sigma=self.bb_sigma,
                                    aa_phi=self.aa_phi, bb_phi=self.bb_phi,
                                    mean_z=self.mean_function_z)
        self.trace_ = run_chain(self.data_, self.config_)
        self.n_features_in_ = X.shape[1]
        self.n_predict_ = 0 if X_predict is None else X_predict.shape[0]
        return self

    def _std_z(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.array([s.forward(v) for s, v in zip(self.data_.z_std, z)])

    def predict(self, X=None) -> np.ndarray:
        """Posterior mean response.

        With ``X=None`` these are the Rao-Blackwellized predictive means of
        the ``X_predict`` rows given at fit time.
        """
        check_is_fitted(self, "trace_")
        std = self.data_.y_std
        if X is None:
            return std.inverse(estimation.heldout_means(self.trace_))
        X = check_array(X, dtype=float)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            m1, _ = estimation.conditional_moments(self.trace_, self._std_z(row))
            out[i] = m1.mean()
        return std.inverse(out)

    def predictive_draws(self, random_state=None) -> np.ndarray:
        """Draws for the ``X_predict`` rows, shape (n_predict, n_samples)."""
        check_is_fitted(self, "trace_")
        rng = np.random.default_rng(self.random_state if random_state is None else random_state)
        return self.data_.y_std.inverse(estimation.heldout_draws(self.trace_, rng))

    def conditional_density_estimate(self, z, y_grid=None, level: float = 0.9, size: int = 512):
        check_is_fitted(self, "trace_")
        if y_grid is None:
            y_std = estimation.default_y_grid(self.data_.y, size=size)
        else:
            y_std = self.data_.y_std.forward(np.asarray(y_grid, dtype=float))
        est = estimation.conditional_density_estimate(self.trace_, y_std, self._std_z(z), level)
        return estimation.destandardize_density(est, self.data_.y_std)

    def conditional_density(self, y, z) -> np.ndarray:
        check_is_fitted(self, "trace_")
        std = self.data_.y_std
        y = np.asarray(y, dtype=float)
        return estimation.conditional_density(self.trace_, std.forward(y), self._std_z(z)) / std.scale

    def tail_probability(self, T: float, z, level: float = 0.9):
        """Posterior mean and band of ``P(Y <= T | z)``."""
        check_is_fitted(self, "trace_")
        T_std = float(self.data_.y_std.forward(T))
        return estimation.tail_probability(self.trace_, T_std, self._std_z(z), level)
