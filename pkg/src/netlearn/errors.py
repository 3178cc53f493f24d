"""Exception types shared across the package.

Each maps onto a distinct CLI exit code (see ``netlearn.cli``).
"""


class NetlearnError(Exception):
    """Base class for all package errors."""


class ConfigError(NetlearnError, ValueError):
    """Malformed model, network or experiment configuration."""


class ResourceError(NetlearnError):
    """An enumeration or expansion budget would be exceeded."""


class InvariantViolation(NetlearnError):
    """A belief invariant failed on some trajectory.

    ``report`` carries whatever context the raiser attached (usually the
    offending trajectory).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnreachableInformationSet(NetlearnError):
    """A posterior was requested at an information set of probability zero."""
