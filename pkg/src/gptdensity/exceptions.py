"""Exception types shared across the package."""


class GPTError(Exception):
    """Base class for errors raised by gptdensity."""

    exit_code = 1


class InvalidArgumentError(GPTError, ValueError):
    exit_code = 2


class DegenerateDataError(GPTError, ValueError):
    """Data has no spread where a scale is required."""

    exit_code = 2


class NumericalError(GPTError, ArithmeticError):
    """A factorization or normalization failed.

    ``diagnostics`` carries whatever state helps reproduce the failure
    (nugget ladder tried, sweep index, ...).
    """

    exit_code = 3

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"
