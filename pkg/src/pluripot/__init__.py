"""Numerical envelopes, residual functions and weak geodesics on model domains."""

__version__ = "0.1.0"

from .convex import envelope, legendre, legendre_inverse, ma_measure, rooftop, homogenize  # noqa: E402
from .grid import DiskDomain, GridFunction, LogDomain, detect_loci, read_grid, write_grid  # noqa: E402
from .indicator import GammaSet  # noqa: E402
from .ladder import LadderConfig, ResidualReport  # noqa: E402
from .residual import (  # noqa: E402
    asymptotic_rooftop,
    classify_singularity,
    least_maximal_majorant,
    residual,
    residual_green,
    residual_poisson,
    residual_second_term,
)

__all__ = [
    "DiskDomain", "GammaSet", "GridFunction", "LadderConfig", "LogDomain", "ResidualReport",
    "asymptotic_rooftop", "classify_singularity", "detect_loci", "envelope", "homogenize",
    "least_maximal_majorant", "legendre", "legendre_inverse", "ma_measure", "read_grid",
    "residual", "residual_green", "residual_poisson", "residual_second_term", "rooftop", "write_grid",
]
