"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Parameters or in-process inputs violate an operation's contract."""


class DataError(Exception):
    """Inconsistent or malformed data: unknown ids, missing provider rows,
    bad file contents."""
