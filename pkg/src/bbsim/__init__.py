"""Heavy particle + oscillator ladder model of one-dimensional black-body radiation.

Event-driven simulation in exact-classical and action-discretized modes,
Planck/Stefan-Boltzmann reference theory and sweep analysis.
"""
from .engine import BACKEND, CollisionRecord, RunReport, Simulation, next_crossing
from .model import (
    InitialCondition,
    InvariantError,
    ModelError,
    ModelParams,
    SystemState,
    elastic_collision,
    init_state,
    oscillator_params,
    velocity_at_crossing,
)
from .observables import RunningStats, conservation_drift, ipr
from .quantize import QuantizeOutcome, discretize
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CollisionRecord",
    "InitialCondition",
    "InvariantError",
    "ModelError",
    "ModelParams",
    "QuantizeOutcome",
    "RngStream",
    "RunReport",
    "RunningStats",
    "Simulation",
    "SystemState",
    "conservation_drift",
    "discretize",
    "elastic_collision",
    "init_state",
    "ipr",
    "next_crossing",
    "oscillator_params",
    "velocity_at_crossing",
]
