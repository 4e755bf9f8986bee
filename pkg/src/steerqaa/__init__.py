"""Steered quantum annealing of the one-dimensional random-field Ising chain."""

from .evolution import IntegrationError, IntegratorConfig, RunResult, evolve, propagate
from .model import (
    Boundary,
    DisorderInstance,
    SpectrumF,
    initial_ground_state,
    naive_solution,
    naive_success,
    problem_energy_table,
    sorted_spectrum,
)
from .schedule import COS_SIN, Schedule
from .steering import Steering

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "COS_SIN",
    "DisorderInstance",
    "IntegrationError",
    "IntegratorConfig",
    "RunResult",
    "Schedule",
    "SpectrumF",
    "Steering",
    "evolve",
    "initial_ground_state",
    "naive_solution",
    "naive_success",
    "problem_energy_table",
    "propagate",
    "sorted_spectrum",
]
