"""Directed information on finite alphabets.

Causally conditioned input/output kernels, two independent evaluators of
directed information, structural audits (convexity, concavity, lower
semicontinuity, feedback collapse), and the two extremum problems: input
optimization under a power constraint and reconstruction optimization
under a distortion constraint, each with a brute-force grid oracle.
"""
from .capacity import (
    CapacityResult,
    PowerConstraint,
    brute_force_capacity,
    expected_cost,
    min_expected_cost,
    solve_capacity,
)
from .errors import (
    DirinfoError,
    DomainError,
    FormulaDisagreement,
    GridTooLarge,
    InfeasibleConstraint,
    NonConvergentSequence,
    ProblemFileError,
    SpecMismatch,
)
from .information import (
    DirectedInfoReport,
    LscAudit,
    MixtureAudit,
    check_concavity_in_p,
    check_convexity_in_q,
    check_lower_semicontinuity,
    directed_information,
    directed_information_divergence,
    directed_information_sum,
    mutual_information,
    per_step_information,
    tv_distance,
)
from .measures import (
    AlphabetSpec,
    BackwardKernel,
    ConditionedFamily,
    ForwardKernel,
    InfoValue,
    JointMeasure,
    Pmf,
    build_joint,
    condition_on_path,
    extract_backward_family,
    extract_forward_family,
    ignores_output_history,
    joint_path_matrix,
    kl_divergence,
    marginal_x,
    marginal_y,
    mix_conditioned,
    product_pi_backward,
    product_pi_forward,
    refactor_to_kernel,
)
from .nrdf import (
    DistortionConstraint,
    NrdfResult,
    SourceSpec,
    brute_force_nrdf,
    expected_distortion,
    min_expected_distortion,
    rd_curve,
    solve_nrdf,
)
from .solver import SolverConfig
from .verify import SUITE_IDS, SuiteReport, replay, run_suite

__version__ = "0.1.0"

__all__ = [
    "AlphabetSpec",
    "BackwardKernel",
    "CapacityResult",
    "ConditionedFamily",
    "DirectedInfoReport",
    "DirinfoError",
    "DistortionConstraint",
    "DomainError",
    "FormulaDisagreement",
    "ForwardKernel",
    "GridTooLarge",
    "InfeasibleConstraint",
    "InfoValue",
    "JointMeasure",
    "LscAudit",
    "MixtureAudit",
    "NonConvergentSequence",
    "NrdfResult",
    "Pmf",
    "PowerConstraint",
    "ProblemFileError",
    "SUITE_IDS",
    "SolverConfig",
    "SourceSpec",
    "SpecMismatch",
    "SuiteReport",
    "brute_force_capacity",
    "brute_force_nrdf",
    "build_joint",
    "check_concavity_in_p",
    "check_convexity_in_q",
    "check_lower_semicontinuity",
    "condition_on_path",
    "directed_information",
    "directed_information_divergence",
    "directed_information_sum",
    "expected_cost",
    "expected_distortion",
    "extract_backward_family",
    "extract_forward_family",
    "ignores_output_history",
    "joint_path_matrix",
    "kl_divergence",
    "marginal_x",
    "marginal_y",
    "min_expected_cost",
    "min_expected_distortion",
    "mix_conditioned",
    "mutual_information",
    "per_step_information",
    "product_pi_backward",
    "product_pi_forward",
    "rd_curve",
    "refactor_to_kernel",
    "replay",
    "run_suite",
    "solve_capacity",
    "solve_nrdf",
    "tv_distance",
    "__version__",
]
