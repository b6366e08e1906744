"""Gaussian process transfer (GPT) models for Bayesian density estimation
and single-factor density regression."""

__version__ = "0.1.0"

from .estimators import GPTDensity, GPTDensityRegressor
from .exceptions import DegenerateDataError, GPTError, InvalidArgumentError, NumericalError

__all__ = ["GPTDensity", "GPTDensityRegressor", "GPTError", "InvalidArgumentError",
           "DegenerateDataError", "NumericalError"]
