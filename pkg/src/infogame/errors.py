"""Exception types shared across the package.

ConfigError covers everything a run refuses up front (bad schema, CFL
violation, Isaacs gap, size caps); NumericsError covers failures detected
mid-run (NaN/Inf fields).  The CLI maps them to exit codes 2 and 3.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration: schema, preconditions, refused runs."""


class NumericsError(RuntimeError):
    """Numerical failure during a run (non-finite values)."""


class InvalidControlError(ConfigError):
    """A control point is not a member of the declared control set."""
