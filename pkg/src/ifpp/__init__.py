"""First-passage survival curves of one-dimensional diffusions and the
inverse problem of recovering a boundary from a survival curve."""

from .analytic import (bm_constant_barrier_survival, bm_linear_barrier_survival,
                       exponential_curve)
from .boundary import Boundary, check_B0, landmarks, left_limsup, usc_envelope
from .diffusion import (DiffusionSpec, InitialDistribution, TransitionDensity, brownian,
                        brownian_drift, make_unit_transform, transform_boundary)
from .direct import flux_residual, refine_direct, solve_direct_landmark
from .grid import Lattice, apply_L, apply_L1
from .inverse import continuity_check, extract_boundary, solve_inverse
from .montecarlo import estimate_survival
from .survival import SurvivalCurve, decrease_rate, validate_P0

__version__ = "0.1.0"

__all__ = [
    "Boundary", "DiffusionSpec", "InitialDistribution", "Lattice", "SurvivalCurve",
    "TransitionDensity", "apply_L", "apply_L1", "bm_constant_barrier_survival",
    "bm_linear_barrier_survival", "brownian", "brownian_drift", "check_B0",
    "continuity_check", "decrease_rate", "estimate_survival", "exponential_curve",
    "extract_boundary", "flux_residual", "landmarks", "left_limsup", "make_unit_transform",
    "refine_direct", "solve_direct_landmark", "solve_inverse", "transform_boundary",
    "usc_envelope", "validate_P0",
]
