"""Approximation from adaptive measurements under bounded adversarial noise."""

from .errors import *  # noqa: F401,F403
from .spaces import (
    INF, Diagonal, Identity, apply_operator, dist_to_union, embedding_norm, modified_modulus,
    modulus, norm,
)
from .measurement import (
    CoordRefine, DistToUnion, FixedShift, GridSnap, LinearForm, QuantizedCell, Scripted,
    SeededRandom, SignPattern, Transcript, ZeroNoise, observe, run_session, validate,
)
from .entropy import CoverSpec, formula_diagonal, formula_identity, greedy_cover, grid_cover_linf, \
    packing_lower, sandwich
from .algorithms import (
    build_allocation_policy, build_bisection_policy, build_coord_refine_policy,
    build_diag_truncation_policy, build_encoder_policy, diag_allocate, diag_l2noise_error,
    diag_truncation_error, noise_correct,
)
from .bounds import grid_adversary, linear_floor, lipschitz_floor, verify_certificate
from .harness import ExperimentConfig, compare_settings, estimate_worst_error, sweep

__version__ = "0.1.0"
