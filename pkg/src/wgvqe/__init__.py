"""Waveguide eigenmode SSVQE toolkit.

Finite-difference TE/TM operators for square waveguides, exact Pauli
decomposition, a built-in statevector/density-matrix simulator with
depolarizing noise, weighted subspace-search VQE with adaptive shot
allocation, and a DDQN-based circuit architecture search.
"""

from .ansatz import ActionCatalog, CircuitFullError, apply_action, build_hea, encode_observation
from .paulis import PauliString, PauliSum, decompose_hermitian, exact_expectation, to_matrix
from .rl import QNetwork, ReplayBuffer, RlConfig, SearchReport, run_search
from .simulator import Circuit, Gate, NoiseSpec, run_density, run_statevector, sample_pauli
from .ssvqe import (
    ShotPlan,
    SsvqeConfig,
    SsvqeOutcome,
    adaptive_estimate,
    build_shot_plan,
    optimize,
    parameter_shift_gradient,
    weighted_cost,
)
from .waveguide import (
    ConvergenceError,
    ModeField,
    WaveguideOperator,
    build_operator,
    compose_mode,
    reconstruct_mode,
    reference_spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "ActionCatalog",
    "Circuit",
    "CircuitFullError",
    "ConvergenceError",
    "Gate",
    "ModeField",
    "NoiseSpec",
    "PauliString",
    "PauliSum",
    "QNetwork",
    "ReplayBuffer",
    "RlConfig",
    "SearchReport",
    "ShotPlan",
    "SsvqeConfig",
    "SsvqeOutcome",
    "WaveguideOperator",
    "adaptive_estimate",
    "apply_action",
    "build_hea",
    "build_operator",
    "build_shot_plan",
    "compose_mode",
    "decompose_hermitian",
    "encode_observation",
    "exact_expectation",
    "optimize",
    "parameter_shift_gradient",
    "reconstruct_mode",
    "reference_spectrum",
    "run_density",
    "run_search",
    "run_statevector",
    "sample_pauli",
    "to_matrix",
    "weighted_cost",
]
