"""Named benchmark systems used by the tests and the experiment registry."""
from __future__ import annotations

import numpy as np

from .control import ControlPlant
from .filtering import FilterPlant
from .sim import PendulumParams, linearized_pendulum_plant


def scalar_filter_plant():
    """One-state estimation benchmark with unit couplings."""
    return FilterPlant([[0.5]], [[1.0]], [[1.0]], [[1.0]])


def tracking_filter_plant(dt=0.01):
    """Position tracking from noisy position measurements.

    Double-integrator kinematics sampled at ``dt``: the state is (position,
    velocity), acceleration enters through the disturbance, and only the
    position is measured and estimated.
    """
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.0], [dt]])
    C = np.array([[1.0, 0.0]])
    L = np.array([[1.0, 0.0]])
    return FilterPlant(A, B, C, L)


def scalar_control_plant():
    """One-state control benchmark with unit weights."""
    return ControlPlant([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])


def tracking_control_plant(dt=0.01):
    """Double-integrator regulation with matched control/disturbance entry."""
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.0], [dt]])
    return ControlPlant(A, B, B.copy(), np.eye(2), np.eye(1))


def pendulum_origin_plant(dt=1e-3):
    """Pendulum linearized at the upright equilibrium."""
    return linearized_pendulum_plant(0.0, PendulumParams(dt=dt))


NAMED_PLANTS = {
    "scalar-filter": ("filter", scalar_filter_plant),
    "tracking-filter": ("filter", tracking_filter_plant),
    "tracking": ("filter", tracking_filter_plant),
    "scalar-control": ("control", scalar_control_plant),
    "tracking-control": ("control", tracking_control_plant),
    "pendulum-origin": ("control", pendulum_origin_plant),
}
