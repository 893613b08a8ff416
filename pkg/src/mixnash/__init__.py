"""Distributed Nash equilibrium seeking for games among mixed first- and second-order players."""

from .controller import Gains, SeekerState
from .errors import ConfigError, MixNashError
from .game import GameDefinition, QuadraticGame, monotonicity_constant, nash_oracle, vehicles5
from .graph import CommGraph, estimator_matrix, laplacian, solve_lyapunov
from .rbfnn import RbfNetwork, RbfParams, tanh_kappa
from .scenarios import build_scenario, vehicles5_scenario
from .sim import DISTURBANCE_FREE, FULL, ClosedLoop, Scenario, Trajectory, integrate, metrics

__version__ = "0.1.0"

__all__ = [
    "CommGraph", "ClosedLoop", "ConfigError", "DISTURBANCE_FREE", "FULL", "Gains", "GameDefinition",
    "MixNashError", "QuadraticGame", "RbfNetwork", "RbfParams", "Scenario", "SeekerState", "Trajectory",
    "build_scenario", "estimator_matrix", "integrate", "laplacian", "metrics", "monotonicity_constant",
    "nash_oracle", "solve_lyapunov", "tanh_kappa", "vehicles5", "vehicles5_scenario",
]
