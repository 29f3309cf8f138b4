"""Exception types shared across the package."""


class InputFormatError(ValueError):
    """A data file could not be parsed (bad header, bad row, wrong field count)."""


class ConvergenceError(RuntimeError):
    """An iterative optimizer failed to converge within its restart budget."""
