"""High- and low-fidelity solvers for the Duffing and heat-transfer testbeds."""

from .duffing import (
    DuffingConfig,
    duffing_lofi_solve,
    duffing_solve,
    duffing_trajectories,
    linear_discrepancy_oracle,
    steady_state_response,
)
from .heat import HeatModelConfig, HeatSolution, Lattice, heat_lofi_solve, heat_solve
from .kl import RandomFieldKL, kl_build, kl_sample
from .sampling import add_noise, sample_uncertain_inputs

__all__ = [
    "DuffingConfig",
    "duffing_solve",
    "duffing_lofi_solve",
    "duffing_trajectories",
    "linear_discrepancy_oracle",
    "steady_state_response",
    "HeatModelConfig",
    "HeatSolution",
    "Lattice",
    "heat_solve",
    "heat_lofi_solve",
    "RandomFieldKL",
    "kl_build",
    "kl_sample",
    "add_noise",
    "sample_uncertain_inputs",
]
