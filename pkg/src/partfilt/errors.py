"""Exception types raised across the package."""


class PartfiltError(Exception):
    """Base class; ``kind`` is used for the CLI's one-line error output."""

    kind = "error"


class ParseError(PartfiltError, ValueError):
    kind = "parse"

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class GraphIndexError(PartfiltError, IndexError):
    kind = "index"


class ShapeError(PartfiltError, ValueError):
    kind = "shape"


class ScaleError(PartfiltError, ValueError):
    kind = "scale"


class NumericError(PartfiltError, ArithmeticError):
    kind = "numeric"


class DegenerateSubspaceError(NumericError):
    kind = "degenerate-subspace"


class PreconditionError(PartfiltError, ValueError):
    kind = "precondition"


class TrainingError(PartfiltError, RuntimeError):
    kind = "training"


class ArgumentError(PartfiltError, ValueError):
    kind = "argument"
