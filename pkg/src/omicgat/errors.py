"""Exception types mapped to CLI exit codes."""


class DataError(Exception):
    """Corrupt, missing or inconsistent input data (exit code 3)."""


class NumericError(Exception):
    """Non-finite values or diverging optimization (exit code 4)."""
