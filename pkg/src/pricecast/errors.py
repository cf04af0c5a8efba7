"""Exception hierarchy and process exit codes.

Every failure mode surfaced by the library maps onto one of these classes so
the CLI can translate it into a stable exit code.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_DOMAIN = 4
EXIT_CONVERGENCE = 5
EXIT_NUMERIC = 6
EXIT_IO = 7


class PricecastError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class UsageError(PricecastError):
    """API misuse: mismatched artifacts, missing prerequisites, stale caches."""

    exit_code = EXIT_USAGE


class FormatError(PricecastError):
    """Malformed input files (bad headers, unreadable structure)."""

    exit_code = EXIT_FORMAT


class DomainError(PricecastError):
    """Inputs that are structurally valid but violate a precondition."""

    exit_code = EXIT_DOMAIN


class ConvergenceError(PricecastError):
    """An iterative procedure exhausted its budget.

    ``partial`` carries the best result obtained before giving up (a fit, a
    metrics log) so callers can still report it.
    """

    exit_code = EXIT_CONVERGENCE

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NumericError(PricecastError):
    """Non-finite values where finite ones are required."""

    exit_code = EXIT_NUMERIC
