"""Radial solutions of -Δu = u^p + M|∇u|^q studied as a planar dynamical system."""
from .equilibria import Equilibrium, classify_equilibrium, classify_origin, find_equilibria
from .errors import (BadK, BlowupGuard, EmdenFlowError, NoCycleFound, NotACenterCandidate, NotAnEquilibrium,
                     NotASaddle, RegimeMismatch, RegimeUndefined, StepUnderflow, TransformInvalid,
                     UndeterminedTrajectory)
from .field import PhasePoint, eval_H, jacobian, make_rhs, region_of
from .integrator import IntegrationConfig, Trajectory, integrate
from .manifolds import seed_origin_slow, seed_origin_stable, seed_regular, seed_saddle_branches
from .params import ProblemParams, critical_constants, derive_constants, regime_of

__version__ = "0.1.0"

__all__ = [
    "BadK", "BlowupGuard", "EmdenFlowError", "Equilibrium", "IntegrationConfig", "NoCycleFound",
    "NotACenterCandidate", "NotAnEquilibrium", "NotASaddle", "PhasePoint", "ProblemParams", "RegimeMismatch",
    "RegimeUndefined", "StepUnderflow", "TransformInvalid", "Trajectory", "UndeterminedTrajectory",
    "classify_equilibrium", "classify_origin", "critical_constants", "derive_constants", "eval_H",
    "find_equilibria", "integrate", "jacobian", "make_rhs", "regime_of", "region_of", "seed_origin_slow",
    "seed_origin_stable", "seed_regular", "seed_saddle_branches",
]
