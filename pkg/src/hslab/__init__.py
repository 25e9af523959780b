"""Numerical tools for the weighted Hardy-Sobolev inequality and its stability."""

__version__ = "0.1.0"

from .core import Params, RadialProfile, bump, extremal, make_params, tangent_basis
from .functionals import deficit, grad_pnorm, sharp_constant, weighted_starnorm
from .manifold import decompose, distance
from .spectral import GridSpec, eigen_mode, ppk_gap, spectral_gap_tau

__all__ = [
    "Params", "RadialProfile", "bump", "extremal", "make_params", "tangent_basis",
    "deficit", "grad_pnorm", "sharp_constant", "weighted_starnorm",
    "decompose", "distance", "GridSpec", "eigen_mode", "ppk_gap", "spectral_gap_tau",
]
