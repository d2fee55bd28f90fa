"""Exception hierarchy shared across the package.

The CLI maps UsageError to exit code 1 and DataError to exit code 2;
everything else is a bug.
"""


class MmsgError(Exception):
    """Base class for all package errors."""


class UsageError(MmsgError):
    """Invalid invocation: bad flags, malformed config, unknown method names."""


class DataError(MmsgError):
    """The inputs are structurally valid but unusable (empty vocabulary,
    too few held-out candidates, degenerate vectors, ...)."""
