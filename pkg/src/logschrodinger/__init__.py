"""Numerical logarithm of Schrödinger operators ``-Delta + V`` built from
heat-kernel time integrals, with spectral oracles."""

from .numerics import Field, Grid, QuadratureSpec, build_grid
from .potential import Potential

__all__ = ["Field", "Grid", "QuadratureSpec", "build_grid", "Potential"]
__version__ = "0.1.0"
