"""Weighted graphs in Euclidean space with density: solvers, stability and calibration."""
from . import calibration, density, fixtures, identities, solver, spectrum, surface
from .density import Density, DensityProfile, make_density
from .errors import *  # noqa: F401,F403
from .identities import IdentityReport
from .solver import SolveReport, solve_vertical
from .spectrum import SpectrumReport, assemble, min_eigenvalue
from .surface import RadialGraph, VerticalGraph, geometry, triangulate

__version__ = "0.1.0"
