"""Exception types; the CLI maps them onto exit codes."""


class InputError(ValueError):
    """Malformed or inconsistent user input (CLI exit code 1)."""


class RecordFormatError(InputError):
    """A corpus line could not be parsed."""

    def __init__(self, message: str, line: int, path=None):
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path


class InvariantError(RuntimeError):
    """An internal invariant was violated (CLI exit code 2)."""


class UndefinedCorrelationError(ValueError):
    """Pearson correlation is undefined because an input has zero variance."""
