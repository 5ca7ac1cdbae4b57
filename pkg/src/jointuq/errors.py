"""Exception types shared across the package."""


class JointUQError(Exception):
    """Base class for all package errors."""


class ShapeError(JointUQError, ValueError):
    """Mismatched layer dimensions or array shapes."""


class NonFiniteError(JointUQError, ValueError):
    """NaN or infinite values where finite numbers are required."""


class StaleCacheError(JointUQError, ValueError):
    """A forward cache was used with a network it did not come from, or after an update."""


class TrainingDiverged(JointUQError, RuntimeError):
    """Mean epoch loss became non-finite."""

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (mean loss {loss})")
        self.epoch = epoch
        self.loss = loss

    def __reduce__(self):
        return type(self), (self.epoch, self.loss)


class DataFormatError(JointUQError, ValueError):
    """Malformed CSV input; ``row`` and ``column`` locate the problem (1-based rows, header is row 1)."""

    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.message = message
        self.row = row
        self.column = column

    def __reduce__(self):
        return type(self), (self.message, None, None), {"row": self.row, "column": self.column}


class RaggedRowError(DataFormatError):
    pass


class NonNumericCellError(DataFormatError):
    pass


class MissingColumnError(DataFormatError):
    pass


class ConfigError(JointUQError, ValueError):
    """Experiment configuration failed validation; ``path`` points at the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message
        self.path = path

    def __reduce__(self):
        return type(self), (self.message, self.path)
