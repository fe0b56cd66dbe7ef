"""Exception hierarchy shared by every module."""

from __future__ import annotations


class VesselError(Exception):
    """Base class for all errors raised by thinvessel."""


class GeometryValidationError(VesselError, ValueError):
    """Geometry input violates a structural requirement."""


class DomainError(VesselError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class TipSingularityError(DomainError):
    """Evaluation requested exactly at the degenerate tip s = 1."""


class CutoffZoneError(DomainError):
    """Evaluation requested outside the zone where the cutoff is identically one."""


class SingularityError(DomainError):
    """Kernel evaluated at coincident points."""


class ConditioningError(VesselError, ArithmeticError):
    """An assembled matrix is numerically singular."""


class ConvergenceError(VesselError, ArithmeticError):
    """A solve finished with a residual above the accepted threshold."""


class ConfigError(VesselError, ValueError):
    """Invalid run configuration."""
