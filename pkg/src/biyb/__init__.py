"""Numerical toolkit for the two-parameter Yang-Baxter deformation of the
principal chiral model on SU(n).

Modules
-------
algebra
    Cartan-Weyl basis of su(n), the canonical Yang-Baxter operator and
    algebraic identity checks.
group
    Exponential map, adjoint action, dressed operators and the Iwasawa
    factorization of SL(n, C).
model
    Field equations, currents and a method-of-lines solver on the cylinder.
lax
    Lax connections, their one-parameter limits and gauge relations.
spectral
    Extended solutions, the Iwasawa cascades and monodromy.
cli
    The ``biyb`` command-line driver.
"""

from .algebra import CartanWeylBasis, build_cartan_weyl, canonical_R, mybe_residual
from .errors import BiYBError
from .group import iwasawa
from .lax import SpectralParameter, bi_yb_lax
from .model import BiYBModel, FieldState, InitialData, ModelParams, Trajectory, Worldsheet
from .spectral import SolutionLattice, param_map, pcm_to_yb, yb_to_biyb

__version__ = "0.1.0"

__all__ = [
    "CartanWeylBasis",
    "build_cartan_weyl",
    "canonical_R",
    "mybe_residual",
    "BiYBError",
    "iwasawa",
    "SpectralParameter",
    "bi_yb_lax",
    "BiYBModel",
    "FieldState",
    "InitialData",
    "ModelParams",
    "Trajectory",
    "Worldsheet",
    "SolutionLattice",
    "param_map",
    "pcm_to_yb",
    "yb_to_biyb",
]
