"""Exception hierarchy shared across the package.

Concrete exceptions live next to the code that raises them; everything
derives from one of the two bases below so the CLI can map failures onto
its documented exit codes (2 for data/parse problems, 3 for numeric ones).
"""


class ProofspaceError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ProofspaceError):
    """Malformed, inconsistent, or unrecognized input data."""


class NumericError(ProofspaceError):
    """A numeric computation could not proceed or produced non-finite values."""
