"""Planar Cosserat-rod simulation with an inner/outer-loop task-space tracking controller."""
from .analysis import ErrorNorms, StabilityReport, check_stability_conditions, error_norms, fit_decay_rate
from .config import ConfigError, ScenarioConfig, load_config
from .dynamics import ControlSignal, RodParams, RodState, initial_state, step
from .grid import GridSpec
from .inner import InnerGains, compute_mc, damping_constant_bound
from .outer import OuterGains, OuterSolution, solve_outer
from .runner import RunRecord, run_scenario
from .trajectory import DesiredTrajectory, make_bent_target, regulate_tip

__all__ = [
    "ControlSignal",
    "ConfigError",
    "DesiredTrajectory",
    "ErrorNorms",
    "GridSpec",
    "InnerGains",
    "OuterGains",
    "OuterSolution",
    "RodParams",
    "RodState",
    "RunRecord",
    "ScenarioConfig",
    "StabilityReport",
    "check_stability_conditions",
    "compute_mc",
    "damping_constant_bound",
    "error_norms",
    "fit_decay_rate",
    "initial_state",
    "load_config",
    "make_bent_target",
    "regulate_tip",
    "run_scenario",
    "solve_outer",
    "step",
]
