"""Exception types shared across the package.

Each error carries a short machine-readable ``code`` that the command line
front end maps onto a stable exit status.
"""

from __future__ import annotations


class LiouvilleError(Exception):
    """Base class; ``code`` is the machine-readable tag, ``exit_code`` the CLI status."""

    code = "error"
    exit_code = 3

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ValidationError(LiouvilleError, ValueError):
    code = "invalid_input"
    exit_code = 2


class IntegrationError(LiouvilleError):
    """A trajectory produced a non-finite value."""

    code = "integration_failure"
    exit_code = 3

    def __init__(self, message: str, site: int | None = None, realization: int | None = None):
        super().__init__(message)
        self.site = site
        self.realization = realization


class AssemblyError(LiouvilleError):
    code = "assembly_failure"
    exit_code = 3


class PositivityViolation(LiouvilleError):
    """Raised when an explicit step drives a cell below the positivity floor."""

    code = "positivity_violation"
    exit_code = 3

    def __init__(self, message: str, step: int, min_value: float):
        super().__init__(message)
        self.step = step
        self.min_value = min_value


class GridMismatch(LiouvilleError, ValueError):
    code = "grid_mismatch"
    exit_code = 4
