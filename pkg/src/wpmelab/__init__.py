"""Radial finite-volume lab for the weighted porous medium equation."""

from .errors import BlowupDomainError, ConfigError, DomainError, NumericError, WpmeError
from .grid import GridFunction, RadialGrid, make_grid
from .model import Exponents, ProblemParams, WeightSpec, derive_exponents, existence_time
from .profiles import EllipticProfile, ExplicitFamily, explicit_value, shoot_profile
from .solver import BoundaryData, SolverOptions, Trajectory, solve

__all__ = [
    "BlowupDomainError", "BoundaryData", "ConfigError", "DomainError", "EllipticProfile",
    "ExplicitFamily", "Exponents", "GridFunction", "NumericError", "ProblemParams",
    "RadialGrid", "SolverOptions", "Trajectory", "WeightSpec", "WpmeError",
    "derive_exponents", "existence_time", "explicit_value", "make_grid", "shoot_profile",
    "solve",
]
