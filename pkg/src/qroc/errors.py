"""Exception hierarchy shared across the package.

Each branch maps to a distinct CLI exit code (see cli.EXIT_CODES):
parse errors for malformed input files, validation errors for
arguments that are well-formed but out of contract, solver errors for
pivoting failures, inference errors for variance-stage failures.
"""


class QrocError(Exception):
    """Base class for all package errors."""


class ParseError(QrocError):
    """Input file could not be parsed (bad header, bad cell, bad config)."""


class ValidationError(QrocError):
    """Arguments violate a documented precondition."""


class SolverError(QrocError):
    """The pivoting solver failed to produce a valid vertex."""


class ExtremeQuantileError(SolverError):
    """Requested quantile level leaves no interior vertex (rho*n1 < 1 or (1-rho)*n1 < 1)."""


class SingularDesignError(SolverError):
    """Case design matrix does not have full column rank."""


class InferenceError(QrocError):
    """Variance estimation failed (infeasible shifted system, degenerate resamples)."""
