"""Squared-exponential Gaussian process numerics."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .exceptions import InvalidArgumentError, NumericalError

DEFAULT_NUGGET = 1e-6
MAX_NUGGET = 1e-2


@dataclass(frozen=True)
class GpHyper:
    """Kernel ``(1/phi) exp(-c (x - x')^2)`` plus ``nugget`` on the diagonal."""

    phi: float = 1.0
    c: float = 1.0
    nugget: float = DEFAULT_NUGGET

    def __post_init__(self):
        if not self.phi > 0:
            raise InvalidArgumentError(f"phi must be positive, got {self.phi}")
        if not self.c >= 0:
            raise InvalidArgumentError(f"c must be nonnegative, got {self.c}")
        if not self.nugget >= 0:
            raise InvalidArgumentError(f"nugget must be nonnegative, got {self.nugget}")


def se_kernel(x, x2, h: GpHyper):
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return np.exp(-h.c * (x - x2) ** 2) / h.phi


def correlation(points, points2=None, c: float = 1.0) -> np.ndarray:
    """Unit-amplitude squared-exponential correlation matrix."""
    a = np.asarray(points, dtype=float).reshape(-1)
    b = a if points2 is None else np.asarray(points2, dtype=float).reshape(-1)
    return np.exp(-c * np.subtract.outer(a, b) ** 2)


def build_gram(points, h: GpHyper) -> np.ndarray:
    """Gram matrix ``K(points, points) + nugget * I``."""
    points = np.asarray(points, dtype=float).reshape(-1)
    K = correlation(points, c=h.c) / h.phi
    K[np.diag_indices_from(K)] += h.nugget
    return K


def stable_cholesky(A: np.ndarray, nugget: float = 0.0):
    """Lower Cholesky factor of ``A``, inflating the diagonal on failure.

    The first attempt uses ``A`` as given. On failure, ``nugget`` (or
    DEFAULT_NUGGET when zero) is added and escalated tenfold up to
    MAX_NUGGET. Returns ``(L, added)`` where ``added`` is the extra
    diagonal that made the factorization succeed.
    """
    A = np.asarray(A, dtype=float)
    tried = []
    extra = 0.0
    step = nugget if nugget > 0 else DEFAULT_NUGGET
    while True:
        try:
            M = A if extra == 0.0 else A + extra * np.eye(A.shape[0])
            return linalg.cholesky(M, lower=True, check_finite=False), extra
        except linalg.LinAlgError:
            tried.append(extra)
        extra = step if extra == 0.0 else extra * 10.0
        if extra > MAX_NUGGET * (1 + 1e-9):
            min_eig = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0]) if np.all(np.isfinite(A)) else np.nan
            raise NumericalError(
                "Cholesky factorization failed after nugget escalation",
                size=A.shape[0], nuggets_tried=tried, min_eigenvalue=min_eig,
            )


class MeanFunction:
    """GP mean function, closed form or tabulated with linear interpolation."""

    def __init__(self, func: Optional[Callable] = None, grid=None, values=None, name: str = ""):
        if (func is None) == (grid is None):
            raise InvalidArgumentError("give either a callable or a (grid, values) table")
        self.func = func
        self.name = name
        if grid is not None:
            grid = np.asarray(grid, dtype=float).reshape(-1)
            values = np.asarray(values, dtype=float).reshape(-1)
            if grid.shape != values.shape or grid.size < 2:
                raise InvalidArgumentError("tabulated mean needs >= 2 matching grid/values")
            if np.any(np.diff(grid) <= 0):
                raise InvalidArgumentError("tabulated mean grid must be strictly increasing")
            if not np.all(np.isfinite(values)):
                raise InvalidArgumentError("tabulated mean values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def tabulated(cls, grid, values, name: str = "tabulated") -> "MeanFunction":
        return cls(grid=grid, values=values, name=name)

    @classmethod
    def constant(cls, value: float = 0.0) -> "MeanFunction":
        return cls(lambda x: np.full(np.shape(x), float(value)), name=f"constant({value})")

    @property
    def is_tabulated(self) -> bool:
        return self.grid is not None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_tabulated:
            return np.interp(x, self.grid, self.values)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape).copy()

    def __repr__(self):
        return f"MeanFunction({self.name or ('tabulated' if self.is_tabulated else 'callable')})"


@dataclass
class GaussianLaw:
    """Multivariate normal law with a lazily computed lower factor."""

    mean: np.ndarray
    cov: np.ndarray
    nugget: float = 0.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise InvalidArgumentError(
                f"covariance shape {self.cov.shape} does not match mean length {d}"
            )
        if not np.allclose(self.cov, self.cov.T, rtol=0, atol=1e-10 * max(1.0, np.abs(self.cov).max(initial=0))):
            raise InvalidArgumentError("covariance must be symmetric")
        self.cov = 0.5 * (self.cov + self.cov.T)

    @cached_property
    def chol(self) -> np.ndarray:
        L, _ = stable_cholesky(self.cov, self.nugget)
        return L

    def logpdf(self, v) -> float:
        L = self.chol
        r = linalg.solve_triangular(L, np.asarray(v, float) - self.mean, lower=True)
        return float(-0.5 * r @ r - np.log(np.diag(L)).sum() - 0.5 * r.size * np.log(2 * np.pi))


def mvn_sample(law: GaussianLaw, rng, size: Optional[int] = None) -> np.ndarray:
    """Draw from ``law``; shape ``(d,)`` or ``(size, d)``."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    d = law.mean.size
    if size is None:
        return law.mean + law.chol @ rng.standard_normal(d)
    return law.mean + rng.standard_normal((size, d)) @ law.chol.T


def gp_conditional(targets, known_points, known_values, mean: Callable, h: GpHyper) -> GaussianLaw:
    """Law of the process at ``targets`` given its values at ``known_points``.

    Both blocks carry the nugget on their diagonals, so the conditional
    covariance stays positive definite even when a target coincides with
    a known point.
    """
    t = np.asarray(targets, dtype=float).reshape(-1)
    k = np.asarray(known_points, dtype=float).reshape(-1)
    v = np.asarray(known_values, dtype=float).reshape(-1)
    if k.size == 0:
        raise InvalidArgumentError("need at least one known point")
    if v.size != k.size:
        raise InvalidArgumentError("known_points and known_values differ in length")
    K_kk = build_gram(k, h)
    K_tt = build_gram(t, h)
    K_tk = correlation(t, k, h.c) / h.phi
    L, _ = stable_cholesky(K_kk, h.nugget)
    A = linalg.solve_triangular(L, K_tk.T, lower=True)
    r = linalg.solve_triangular(L, v - mean(k), lower=True)
    cond_mean = mean(t) + A.T @ r
    cond_cov = K_tt - A.T @ A
    return GaussianLaw(cond_mean, 0.5 * (cond_cov + cond_cov.T), nugget=h.nugget)
