"""Exception and warning types shared across the package."""


class ShapeError(ValueError):
    """Operand extents are inconsistent with an operation's contract."""


class NumericError(ArithmeticError):
    """An operation produced or received non-finite values."""


class UsageError(ValueError):
    """An API was called outside its contract (e.g. backward on a non-scalar)."""


class ConfigError(ValueError):
    """A configuration file or preset failed validation."""


class TrainingAborted(RuntimeError):
    """Training stopped on a non-finite loss; carries the offending step."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class EmptyMaskWarning(UserWarning):
    """A masked reduction saw zero valid pixels."""
