"""Pathlength-regret-optimal control and estimation for discrete LTI systems."""

from . import benchmarks, errors
from .control import (
    ControlPlant,
    FeasibilityReport,
    bisect_gamma,
    h2_synthesize,
    hinf_synthesize,
    offline_optimal,
    pathlength_synthesize,
)
from .filtering import (
    FilterPlant,
    NehariData,
    filter_regret_check,
    kalman_synthesize,
    nehari_solve,
    pathlength_filter_synthesize,
    pathlength_gamma_feasible,
    smoothed_oracle,
)
from .numerics import (
    IndefiniteDareResult,
    Inertia,
    RiccatiSolution,
    inertia,
    max_singular_value,
    solve_dare,
    solve_indefinite_dare,
    solve_stein,
    solve_stein_sylvester,
    spectral_radius,
)
from .sim import (
    DisturbanceSpec,
    PendulumParams,
    energy,
    generate,
    pathlength,
    simulate_control,
    simulate_filter,
    simulate_pendulum_mpc,
)
from .xfer import AnticausalStateSpace, StateSpace, adjoint_evaluate, compose, evaluate, invert

__all__ = [
    "AnticausalStateSpace",
    "ControlPlant",
    "DisturbanceSpec",
    "FeasibilityReport",
    "FilterPlant",
    "IndefiniteDareResult",
    "Inertia",
    "NehariData",
    "PendulumParams",
    "RiccatiSolution",
    "StateSpace",
    "adjoint_evaluate",
    "benchmarks",
    "bisect_gamma",
    "compose",
    "energy",
    "errors",
    "evaluate",
    "filter_regret_check",
    "generate",
    "h2_synthesize",
    "hinf_synthesize",
    "inertia",
    "invert",
    "kalman_synthesize",
    "max_singular_value",
    "nehari_solve",
    "offline_optimal",
    "pathlength",
    "pathlength_filter_synthesize",
    "pathlength_gamma_feasible",
    "pathlength_synthesize",
    "simulate_control",
    "simulate_filter",
    "simulate_pendulum_mpc",
    "smoothed_oracle",
    "solve_dare",
    "solve_indefinite_dare",
    "solve_stein",
    "solve_stein_sylvester",
    "spectral_radius",
]
