"""Greedy generalized kernel interpolation and symmetric collocation for linear PDEs."""

__version__ = "0.1.0"

from .functionals import CandidateSet, Functional, gram_entry, representer_eval
from .greedy import GreedyConfig, GreedyState, IterationRecord, evaluate_interpolant, run, step
from .kernels import MaternKernel, Operator, kernel_apply, psi_derivatives
from .oracle import power_dense, solve_dense
from .problems import builtin_problems, generate_candidates, get_problem, predicted_exponent

__all__ = [
    "CandidateSet",
    "Functional",
    "GreedyConfig",
    "GreedyState",
    "IterationRecord",
    "MaternKernel",
    "Operator",
    "builtin_problems",
    "evaluate_interpolant",
    "generate_candidates",
    "get_problem",
    "gram_entry",
    "kernel_apply",
    "power_dense",
    "predicted_exponent",
    "psi_derivatives",
    "representer_eval",
    "run",
    "solve_dense",
    "step",
]
