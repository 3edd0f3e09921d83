"""Error types shared across the package."""


class DataError(Exception):
    """Malformed or inconsistent input data (files, payloads, streams)."""


class ConvergenceError(RuntimeError):
    """Iterative solver exhausted its budget; carries partial diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
