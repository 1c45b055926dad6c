"""Exception types shared across the package."""


class SolverError(RuntimeError):
    """A numeric solver failed to converge; the message carries diagnostics."""


class InfeasibleError(ValueError):
    """The requested design target cannot be met (e.g. power unattainable,
    or no test sample size below the cap achieves the requested width)."""


class UndefinedMetricError(ValueError):
    """A performance fraction has an empty denominator."""
