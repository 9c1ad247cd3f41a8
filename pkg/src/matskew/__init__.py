"""Matrix variate skew distributions (GH, VG, NIG) and their ECM fitter."""

from .errors import (
    BoundaryError,
    DegenerateWeightsError,
    DimensionError,
    DomainError,
    FitError,
    MatskewError,
    NoRootError,
)
from .matnorm import MatrixParamSet
from .matrixdist import GH, NIG, VG, MatrixSkewModel, logpdf, mgf, sample
from .ecm import FitConfig, FitResult, fit

__version__ = "0.1.0"
