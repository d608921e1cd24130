"""Exception taxonomy shared across the package.

InputError covers everything a user can fix (bad listing, bad profile,
mismatched vendor); the CLI maps it to exit code 1. InternalInvariantError
signals a broken analysis invariant (e.g. blame conservation) and maps to
exit code 2 so CI can tell bugs from bad inputs.
"""

from __future__ import annotations


class InputError(Exception):
    """Malformed or inconsistent user input."""


class ListingError(InputError):
    """Syntax or semantic error in a disassembly listing."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 token: str | None = None):
        self.line = line
        self.column = column
        self.token = token
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", col {column}"
            where = f" ({where})"
        tok = f" near {token!r}" if token else ""
        super().__init__(f"{message}{tok}{where}")


class ProfileError(InputError):
    """Profile document violates the schema or its invariants."""


class ConfigError(InputError):
    """Bad key or value in an analysis config file."""


class InternalInvariantError(Exception):
    """An analysis invariant failed; indicates a bug, not bad input."""
