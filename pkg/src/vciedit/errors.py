"""Exception hierarchy.

Configuration-type errors map to CLI exit code 2, numeric/format errors to 3.
"""


class VCIError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(VCIError, ValueError):
    """Invalid parameters, bounds or configuration documents."""


class OrderingError(ConfigurationError):
    """Timesteps supplied in the wrong order."""


class DomainError(ConfigurationError):
    """Argument outside the mathematical domain of an operation."""


class NumericError(VCIError, ArithmeticError):
    """Numerical failure (non-PSD covariance, degenerate input, ...)."""


class PolicyError(NumericError):
    """Sigma policy inconsistent with the schedule (negative radicand)."""


class FormatError(NumericError):
    """Malformed tensor file."""


class FixtureError(VCIError, LookupError):
    """Scripted denoiser queried at an unrecorded timestep."""
