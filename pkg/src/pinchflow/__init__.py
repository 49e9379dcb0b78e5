"""Rotationally symmetric mean curvature flow near a pinched-disk singularity.

Simulates the SO(m)xSO(k+1) reduced flow of hypersurfaces ``R^m x S^k``,
measures the rescaled profile against the quadratic-neck ansatz and checks
the final-time asymptotics ``u_0(x) ~ |x| / sqrt(-log|x|)``.
"""

from pinchflow.frames import (
    FlowGeometry,
    Frame,
    GridProfile,
    MatchingPoint,
    WindowSpec,
    from_rescaled,
    from_secondary_frame,
    japanese_bracket,
    omega_radius,
    secondary_h_identity,
    to_rescaled,
    to_secondary_frame,
)
from pinchflow.solver import (
    RunRecord,
    SolverConfig,
    estimate_blowup_time,
    integrate,
    mcf_rhs,
    rescaled_rhs,
    run_to_pinch,
    step,
)
from pinchflow.analysis import ProfileFit, check_main_profile, fit_profile, remainder_norms
from pinchflow.asymptotics import (
    VerificationReport,
    matching_tau,
    secondary_frame_checks,
    verify_final_profile,
    verify_log_relation,
    verify_ratio_stability,
    verify_u_at_t1,
)

__version__ = "0.1.0"

__all__ = [
    "FlowGeometry",
    "Frame",
    "GridProfile",
    "MatchingPoint",
    "ProfileFit",
    "RunRecord",
    "SolverConfig",
    "VerificationReport",
    "WindowSpec",
    "check_main_profile",
    "estimate_blowup_time",
    "fit_profile",
    "from_rescaled",
    "from_secondary_frame",
    "integrate",
    "japanese_bracket",
    "matching_tau",
    "mcf_rhs",
    "omega_radius",
    "remainder_norms",
    "rescaled_rhs",
    "run_to_pinch",
    "secondary_frame_checks",
    "secondary_h_identity",
    "step",
    "to_rescaled",
    "to_secondary_frame",
    "verify_final_profile",
    "verify_log_relation",
    "verify_ratio_stability",
    "verify_u_at_t1",
]
