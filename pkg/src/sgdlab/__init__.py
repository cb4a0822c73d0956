"""Stochastic gradient descent laboratory for a non-convex 1D test problem.

Noise oracles with declared moment bounds, step-schedule validators,
a seeded SGD engine, and convergence diagnostics (limit classification,
conditional-descent checks, descent-event probes, Lojasiewicz exponents).
"""
from sgdlab.objective import (
    CriticalComponent,
    DomainError,
    ObjectiveSpec,
    make_piecewise,
    make_quadratic,
)
from sgdlab.noise import ConfigurationError, MomentBounds, NoiseOracle
from sgdlab.schedules import PowerLaw, StepSchedule
from sgdlab.engine import RunConfig, TrajectoryRecord, run_ensemble, run_trajectory

__all__ = [
    "ConfigurationError",
    "CriticalComponent",
    "DomainError",
    "MomentBounds",
    "NoiseOracle",
    "ObjectiveSpec",
    "PowerLaw",
    "RunConfig",
    "StepSchedule",
    "TrajectoryRecord",
    "make_piecewise",
    "make_quadratic",
    "run_ensemble",
    "run_trajectory",
]
