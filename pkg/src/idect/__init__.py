"""Spectral solver for integro-differential equations with convolution kernels.

Functions are represented by mapped Legendre series on [0, T]; differential
operators use the ultraspherical method and convolution integrals a banded
Legendre convolution operator.
"""

from .approx import Domain, LegendreSeries, approximate, evaluate
from .conv import KernelPair, fredholm_op, volterra_op
from .errors import *  # noqa: F401,F403
from .linalg import AlmostBandedMatrix, BandedMatrix, aband_solve
from .solver import ConstraintRow, IdeProblem, Solution, assemble, convergence_study, solve

__version__ = "0.1.0"
