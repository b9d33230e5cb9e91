"""Riemannian Anderson mixing (RAM) and its regularized variant (RRAM), with
baseline solvers, benchmark problems and an experiment harness."""

from .baselines import LineSearchConfig, run_fixed_point, run_rgd, run_rlbfgs
from .harness import ExperimentConfig, run_experiment
from .mixing import MixingConfig, SolverReport, Status, run_mixing
from .problems import ProblemInstance, build_problem, initial_point

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "LineSearchConfig",
    "MixingConfig",
    "ProblemInstance",
    "SolverReport",
    "Status",
    "build_problem",
    "initial_point",
    "run_experiment",
    "run_fixed_point",
    "run_mixing",
    "run_rgd",
    "run_rlbfgs",
]
