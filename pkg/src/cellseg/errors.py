"""Exception types raised across the package."""


class CellsegError(Exception):
    """Base class for all package errors."""


class ParameterError(CellsegError, ValueError):
    """A distribution or model parameter is outside its valid range."""


class HeuristicError(ParameterError):
    """The uniform-residual heuristic cannot be applied (Var(X) < 1/12)."""


class TruncationError(CellsegError):
    """The pmf tail could not be pushed below the requested epsilon."""

    def __init__(self, message, tail_mass):
        super().__init__(message)
        self.tail_mass = tail_mass


class DivergenceError(CellsegError, ValueError):
    """A generating-function series does not converge at the given argument."""


class PoleError(CellsegError, ZeroDivisionError):
    """A transform was evaluated at (or numerically at) one of its poles."""


class InstabilityError(CellsegError, ValueError):
    """Quantized load is >= 1, so no steady state exists."""

    def __init__(self, message, load):
        super().__init__(message)
        self.load = load


class RoutingError(CellsegError):
    """A packet was handed to a segmenter that does not own its VOQ."""


class ReassemblyError(CellsegError):
    """Cells reached an output out of order or with missing bytes."""


class TraceParseError(CellsegError, ValueError):
    """A trace line could not be parsed."""

    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class SearchFailure(CellsegError):
    """No stable speed-up was found below the search cap."""
