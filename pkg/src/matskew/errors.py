"""Exception hierarchy shared by the numerical modules and the CLI."""


class MatskewError(Exception):
    """Base class for all package errors."""


class DomainError(MatskewError, ValueError):
    """An argument lies outside the domain of a function or distribution."""


class BoundaryError(DomainError):
    """A parameter hit a boundary where the law degenerates (e.g. b = 0 in a GIG)."""


class DimensionError(MatskewError, ValueError):
    """Matrix shapes do not agree."""


class DegenerateWeightsError(MatskewError):
    """The shared denominator of the location/skewness update vanished."""


class NoRootError(MatskewError):
    """A scalar estimating equation has no root in its admissible range."""


class FitError(MatskewError):
    """The ECM fit had to abort."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration
