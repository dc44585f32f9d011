"""Exception types raised by losslab."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class DegenerateInputError(DomainError):
    """Input is valid in type but carries no usable spread (e.g. all points equal)."""


class ConfigError(DomainError):
    """A configuration file or flag could not be interpreted."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 path: str | None = None):
        self.bare = message
        self.line = line
        self.column = column
        self.path = path
        where = f"{path}: " if path else ""
        if line is not None:
            where += f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class TrainingDiverged(RuntimeError):
    """A training run produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, weights=None, epoch_losses=None):
        super().__init__(message)
        self.epoch = epoch
        self.weights = weights
        self.epoch_losses = list(epoch_losses or [])
