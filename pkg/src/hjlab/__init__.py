"""Numerical toolkit for periodic Hamilton-Jacobi equations d_t g - H(grad g) = 0.

Monotone grid solver, characteristic oracle and flow, grid-scale
semi-concavity constants, and weak-solution / uniqueness checks.
"""

__version__ = "0.1.0"

from .errors import (Blowup, CFLViolation, ConeLeavesCell, GridMismatch, HJLabError,  # noqa: F401
                     HorizonExceeded, HypothesisUnmet, IndexOutOfRange, NonFinite, NotMonotone,
                     NotNormalized)
from .grid import Field, Grid, SpaceTimeField  # noqa: F401
from .hamiltonian import (HamiltonianSpec, InitialCondition, cosine, neg_square,  # noqa: F401
                          normalize, quadratic, reflect)
from .solver import SchemeConfig, characteristic_solution, solve_lax_friedrichs  # noqa: F401
