"""Exception types raised across the package."""


class WPBCError(Exception):
    """Base class for all package errors."""


class DomainError(WPBCError, ValueError):
    """An argument lies outside the domain of a formula."""


class InfeasibleAllocationError(WPBCError, ValueError):
    """A resource allocation violates the block power budget or timing."""


class DegenerateEstimateError(WPBCError, ValueError):
    """A channel estimate row/column has zero norm and cannot be normalized."""


class ConfigError(WPBCError, ValueError):
    """Invalid or incomplete scenario configuration."""
