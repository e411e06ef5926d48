"""patternfit: identify interaction-control parameters that reproduce a
given particle pattern on the unit torus.

The forward model is an anisotropic interacting-particle system with periodic
pairwise forces; the fit minimizes a squared Wasserstein-2 mismatch (plus
quadratic regularization) with a costate-based projected gradient method.
"""

from .params import Control, ForceParams
from .dynamics import ParticleState, Trajectory, simulate, step_forward, velocity_field
from .transport import TransportPlan, periodic_sq_distance, solve_assignment, transport_plan, w2_squared
from .adjoint import AdjointTrajectory, solve_adjoint, terminal_condition
from .optimize import (CostBreakdown, OptimizeResult, OptimizerOptions,
                       evaluate_cost, line_search, project_control,
                       reduced_gradient, run_optimization)
from .estimator import PatternControlEstimator
from .config import ExperimentConfig, desk_preset, full_preset, gradcheck_preset
from .harness import (convergence_study, generate_artificial_data,
                      run_experiment, validate_gradient)

__version__ = "0.1.0"

__all__ = [
    "Control", "ForceParams", "ParticleState", "Trajectory",
    "simulate", "step_forward", "velocity_field",
    "TransportPlan", "periodic_sq_distance", "solve_assignment",
    "transport_plan", "w2_squared",
    "AdjointTrajectory", "solve_adjoint", "terminal_condition",
    "CostBreakdown", "OptimizeResult", "OptimizerOptions",
    "evaluate_cost", "line_search", "project_control", "reduced_gradient",
    "run_optimization",
    "PatternControlEstimator",
    "ExperimentConfig", "desk_preset", "full_preset", "gradcheck_preset",
    "convergence_study", "generate_artificial_data", "run_experiment",
    "validate_gradient",
]
