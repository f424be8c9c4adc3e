"""
Exceptions raised by the optspace package.

Each exception class maps to a documented CLI exit code (see ``EXIT_CODES``).
"""


class McError(Exception):
    """Base class for all matrix completion errors."""

    exit_code = 1


class DimensionError(McError, ValueError):
    """Shape, index or duplicate-entry problem in matrix inputs."""

    exit_code = 3


class ConvergenceError(McError):
    """Iterative method ran out of budget where convergence was required."""

    exit_code = 4


class TheoryError(McError):
    """Asymptotic quantity is undefined for the given model parameters."""

    exit_code = 5


class ExperimentError(McError):
    """Invalid experiment configuration or an experiment that produced nothing usable."""

    exit_code = 6


EXIT_CODES = {
    "success": 0,
    "error": McError.exit_code,
    "usage": 2,
    "dimension": DimensionError.exit_code,
    "convergence": ConvergenceError.exit_code,
    "theory": TheoryError.exit_code,
    "experiment": ExperimentError.exit_code,
    "io": 7,
}
