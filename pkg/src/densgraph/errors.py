"""Exception hierarchy shared by all modules."""


class DensGraphError(Exception):
    """Base class for every error raised by densgraph."""


class DomainError(DensGraphError, ValueError):
    """A point lies outside the domain of a density profile or chart."""


class ModeError(DensGraphError, ValueError):
    """A mode is incompatible with the density or graph it is applied to."""


class GridError(DensGraphError, ValueError):
    """A grid is too small or malformed for the requested stencil."""


class PoleError(DensGraphError, ValueError):
    """A spherical chart touches a pole."""


class MeshError(DensGraphError, ValueError):
    """A mesh contains degenerate simplices."""


class PositivityError(DensGraphError, ValueError):
    """A radial graph iterate produced a non-positive radius."""


class SignError(DensGraphError, ValueError):
    """A function required to have a strict sign vanishes somewhere."""


class StationarityError(DensGraphError, ValueError):
    """A surface is not stationary to the required tolerance."""


class BlowUp(DensGraphError, ArithmeticError):
    """A profile ODE stopped being a graph (slope exceeded the cap)."""


class NonConvergence(DensGraphError, RuntimeError):
    """An iteration failed to converge; ``report`` carries the diagnostics."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class FactorizationError(DensGraphError, RuntimeError):
    """A sparse factorization failed even after adjusting the shift."""


class NoRootError(DensGraphError, RuntimeError):
    """Volume matching found only the trivial amplitude.

    ``competitor`` holds the trivial (s = 0) competitor.
    """

    def __init__(self, message, competitor=None):
        super().__init__(message)
        self.competitor = competitor


class ConfigError(DensGraphError, ValueError):
    """A run configuration failed strict validation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
