"""Error type shared by the whole package.

Every validation failure raises :class:`LhsError` with a stable ``code``
string so the CLI can map failures to exit codes without string matching.
"""

from __future__ import annotations


class LhsError(ValueError):
    """Input or contract violation with a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
