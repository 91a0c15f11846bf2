"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems (bad arguments,
unparseable files) exit 1, numerical failures exit 2.
"""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class ParseError(ValueError):
    """A file does not match its expected schema.

    `line` is the 1-based line number when the problem is tied to one.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InfeasibleRegion(InvalidArgument):
    """Rejection sampling could not find enough admissible points."""


class NumericalFailure(RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


class Divergence(NumericalFailure):
    """Training produced a non-finite loss or gradient.

    `epoch` names the epoch (0-based) where divergence was detected.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class UndefinedNormalizer(InvalidArgument):
    """A normalizing constant is undefined for the given parameters."""
