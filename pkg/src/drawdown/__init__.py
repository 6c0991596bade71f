"""Numerical solver suite for finite-horizon consumption-investment with a
consumption drawdown constraint: dual variational-inequality solve, free
boundary extraction, primal value and feedback controls, Monte Carlo
verification."""

from .boundary import (BoundarySet, compute_boundaries, extract_S, extract_Z,
                       invert_S_to_T, reconstruct_v, solve_phi, solve_w_obstacle)
from .dual_solver import (DualSolution, penalty_cross_check, residual_report,
                          solve_v)
from .errors import DrawdownError
from .estimator import DrawdownPolicySolver
from .lattice import GridConfig, Lattice, build_lattice
from .model import ModelParams, derived_constants, load_params, validate_params
from .primal import (PrimalPolicy, dual_to_primal, feedback_consumption,
                     feedback_investment, value_V)
from .simulate import (Challenger, SimConfig, SimResult, default_challengers,
                       estimate_gap, run_challengers, simulate_policy)
from .verify import run_verification

__version__ = "0.1.0"

__all__ = [
    "BoundarySet", "Challenger", "DrawdownError", "DrawdownPolicySolver",
    "DualSolution", "GridConfig", "Lattice", "ModelParams", "PrimalPolicy",
    "SimConfig", "SimResult", "build_lattice", "compute_boundaries",
    "default_challengers", "derived_constants", "dual_to_primal",
    "estimate_gap", "extract_S", "extract_Z", "feedback_consumption",
    "feedback_investment", "invert_S_to_T", "load_params",
    "penalty_cross_check", "reconstruct_v", "residual_report",
    "run_challengers", "run_verification", "simulate_policy", "solve_phi",
    "solve_v", "solve_w_obstacle", "validate_params", "value_V",
]
