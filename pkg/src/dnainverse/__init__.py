"""Piecewise-linear timing-profile recovery from nonlinear pulse-labeling signals."""

from .pulse import PulseModel, psi_eval, psi_derivative, branch_inverse
from .profile import (
    TimingProfile,
    Breakpoints,
    second_difference,
    breakpoints,
    membership,
    project_piecewise_linear_refit,
)
from .forward import Read, forward, jacobian_diag, generate_profile, add_noise, make_read
from .preprocess import BranchData, CandidateSet, smooth, branch_data, zero_set, candidate_set
from .genlasso import GenLassoProblem, GenLassoSolution, solve_dual, kkt_check, RankDeficientError
from .solver import SolveParams, SolveReport, objective_F, dna_inverse, extract_events
from .pdps import PdpsConfig, PdpsResult, pdps_solve, adapted_pdps, DivergedError

__version__ = "0.1.0"

__all__ = [
    "PulseModel",
    "psi_eval",
    "psi_derivative",
    "branch_inverse",
    "TimingProfile",
    "Breakpoints",
    "second_difference",
    "breakpoints",
    "membership",
    "project_piecewise_linear_refit",
    "Read",
    "forward",
    "jacobian_diag",
    "generate_profile",
    "add_noise",
    "make_read",
    "BranchData",
    "CandidateSet",
    "smooth",
    "branch_data",
    "zero_set",
    "candidate_set",
    "GenLassoProblem",
    "GenLassoSolution",
    "solve_dual",
    "kkt_check",
    "RankDeficientError",
    "SolveParams",
    "SolveReport",
    "objective_F",
    "dna_inverse",
    "extract_events",
    "PdpsConfig",
    "PdpsResult",
    "pdps_solve",
    "adapted_pdps",
    "DivergedError",
    "__version__",
]
