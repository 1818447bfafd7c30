"""Numerical Sobolev constants for electro-magnetic Robin Laplacians.

Subpackages cover the exactly solvable half-line Robin model, magnetic
field algebra, gauge-covariant lattice discretization of the quadratic
form, Sobolev-quotient minimization, homogeneous model constants, the
semiclassical and waveguide sweep harnesses, and two-scale partitions of
unity.  See README.md for the capability tour in demos/.
"""

from . import (  # noqa: F401
    asymptotics,
    discretize,
    geometry,
    minimize,
    model1d,
    models,
    partition,
    waveguide,
)
from .errors import SemisobolevError  # noqa: F401

__version__ = "0.1.0"
