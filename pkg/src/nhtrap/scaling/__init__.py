"""Complex scaling: profiles, deformed operators, eigenvalues and resonances."""
from .eigen import EigenResult, eigen_solve, eigenpair_residual
from .operator import DeformedOperator, assemble_deformed
from .profile import PROFILE_DESCRIPTION, ScalingProfile, build_profile, profile_values, smoothstep
from .resolvent import resolvent_norm, smallest_singular_value, stack_resolvent_norm
from .resonances import (
    Box,
    Resonance,
    ResonanceList,
    extract_resonances,
    filter_resonances,
    match_nearest,
    richardson,
)

__all__ = [
    "PROFILE_DESCRIPTION", "Box", "DeformedOperator", "EigenResult", "Resonance",
    "ResonanceList", "ScalingProfile", "assemble_deformed", "build_profile", "eigen_solve",
    "eigenpair_residual", "extract_resonances", "filter_resonances", "match_nearest",
    "profile_values", "resolvent_norm", "richardson", "smallest_singular_value", "smoothstep",
    "stack_resolvent_norm",
]
