"""
Trajectory simulation, disturbance generators and signal metrics.

Signals are (horizon x dimension) float arrays; 1-D input is treated as a
single channel.  Cost accounting is shared by every simulator and oracle:
states x_0..x_T and controls u_0..u_{T-1} are all charged, so the offline
oracle minimizes exactly the quantity the closed-loop simulators report.

The nonlinear benchmark is a pendulum with unit physical constants,

    d/dt [th, thd] = [thd, sin th + (u + w) cos th],

deployed through a relinearize-synthesize-apply loop: at each step the
dynamics are linearized at the current angle, discretized by forward Euler,
and the requested controller family is (re)synthesized on that linear
plant, with gains cached on a quantized angle grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import (
    CAUSAL,
    ControlPlant,
    FeasibilityReport,
    h2_synthesize,
    hinf_synthesize,
    offline_optimal,
    pathlength_synthesize,
)
from .errors import (
    DimensionMismatch,
    InfeasibleSynthesis,
    NoStabilizingSolution,
    NotDetectable,
    NotStabilizable,
)


def as_signal(w, dim=None):
    """Coerce to a (T, dim) float array with finite entries."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch("signals must be 1-D or 2-D")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatch(f"signal has {arr.shape[1]} channels, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains NaN or Inf entries")
    return arr


def energy(w):
    """Squared l2 norm of the signal."""
    w = as_signal(w)
    return float(np.sum(w * w))


def pathlength(w, interior_only=False):
    """Sum of squared increments of the signal.

    The default embeds the finite record in a two-sided zero signal on the
    leading edge, so the first increment is w_0 itself; ``interior_only``
    counts only increments between recorded samples.
    """
    w = as_signal(w)
    d = np.diff(w, axis=0)
    total = float(np.sum(d * d))
    if not interior_only:
        total += float(np.sum(w[0] * w[0]))
    return total


@dataclass(frozen=True)
class DisturbanceSpec:
    """Declarative disturbance description.

    kind is one of 'constant', 'step', 'sinusoid', 'gaussian_iid',
    'custom'.  ``period`` is in continuous time; samples are taken at
    ``dt``, so a sinusoid sample is amplitude * sin(2 pi t dt / period).
    A step starts at +amplitude and flips sign at each index listed in
    ``switch_times``.  ``samples`` carries the record for 'custom'.
    """

    kind: str
    amplitude: float = 1.0
    period: float = 0.0
    switch_times: tuple = ()
    seed: int = 0
    dim: int = 1
    dt: float = 1.0
    samples: np.ndarray | None = None

    def __post_init__(self):
        kinds = ("constant", "step", "sinusoid", "gaussian_iid", "custom")
        if self.kind not in kinds:
            raise ValueError(f"kind must be one of {kinds}")
        if self.kind == "sinusoid" and self.period <= 0:
            raise ValueError("sinusoid requires period > 0")
        if self.kind == "custom" and self.samples is None:
            raise ValueError("custom requires samples")


def generate(spec, horizon):
    """Deterministic signal from a DisturbanceSpec."""
    T = int(horizon)
    if spec.kind == "constant":
        return np.full((T, spec.dim), spec.amplitude, dtype=float)
    if spec.kind == "step":
        sign = np.ones(T)
        flip = 1.0
        switches = sorted(int(s) for s in spec.switch_times)
        prev = 0
        for s in switches:
            sign[prev:s] = flip
            flip = -flip
            prev = s
        sign[prev:] = flip if switches else 1.0
        out = spec.amplitude * sign
        return np.repeat(out[:, None], spec.dim, axis=1)
    if spec.kind == "sinusoid":
        t = np.arange(T, dtype=float)
        out = spec.amplitude * np.sin(2.0 * np.pi * t * spec.dt / spec.period)
        return np.repeat(out[:, None], spec.dim, axis=1)
    if spec.kind == "gaussian_iid":
        rng = np.random.default_rng(spec.seed)
        return spec.amplitude * rng.standard_normal((T, spec.dim))
    samples = as_signal(spec.samples)
    if samples.shape[0] < T:
        raise ValueError("custom samples are shorter than the horizon")
    return samples[:T].copy()


@dataclass
class ControlSimResult:
    states: np.ndarray      # (T+1, n)
    controls: np.ndarray    # (T, m)
    cost: float
    cumulative: np.ndarray  # (T,) running cost without the terminal term


def simulate_control(plant, policy, w, x0=None):
    """Closed-loop rollout of a policy against a disturbance record.

    The policy is reset first; at each step it is shown the current state
    and the current disturbance (its mode dictates whether the disturbance
    may influence the emitted control).  Cost charges every visited state,
    including the terminal one, plus every control.
    """
    w = as_signal(w, plant.n_disturbances)
    T = w.shape[0]
    n = plant.n_states
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    A, B_u, B_w, Q, R = plant.A, plant.B_u, plant.B_w, plant.Q, plant.R
    states = np.empty((T + 1, n))
    controls = np.empty((T, plant.n_inputs))
    cumulative = np.empty(T)
    policy.reset()
    cost = 0.0
    for t in range(T):
        states[t] = x
        u = policy.step(x, w[t])
        controls[t] = u
        cost += float(x @ Q @ x + u @ R @ u)
        cumulative[t] = cost
        x = A @ x + B_u @ u + B_w @ w[t]
    states[T] = x
    cost += float(x @ Q @ x)
    return ControlSimResult(states, controls, cost, cumulative)


@dataclass
class FilterSimResult:
    estimates: np.ndarray     # (T, r)
    targets: np.ndarray       # (T, r)
    measurements: np.ndarray  # (T, p)
    total_error: float
    cumulative: np.ndarray    # (T,) running squared error


def simulate_filter(plant, estimator, w, v, x0=None):
    """Causal estimation rollout against disturbance and noise records."""
    w = as_signal(w, plant.n_disturbances)
    v = as_signal(v, plant.n_measurements)
    if w.shape[0] != v.shape[0]:
        raise DimensionMismatch("w and v must share the horizon")
    T = w.shape[0]
    x = np.zeros(plant.n_states) if x0 is None else np.asarray(x0, dtype=float).copy()
    A, B, C, L = plant.A, plant.B, plant.C, plant.L
    estimates = np.empty((T, plant.n_targets))
    targets = np.empty((T, plant.n_targets))
    measurements = np.empty((T, plant.n_measurements))
    cumulative = np.empty(T)
    estimator.reset()
    err = 0.0
    for t in range(T):
        s = L @ x
        y = C @ x + v[t]
        shat = estimator.step(y)
        estimates[t] = shat
        targets[t] = s
        measurements[t] = y
        err += float(np.sum((shat - s) ** 2))
        cumulative[t] = err
        x = A @ x + B @ w[t]
    return FilterSimResult(estimates, targets, measurements, err, cumulative)


@dataclass(frozen=True)
class PendulumParams:
    """Unit-constant pendulum with Euler discretization step dt."""

    mass: float = 1.0
    length: float = 1.0
    gravity: float = 1.0
    rot_inertia: float = 1.0
    dt: float = 1e-3

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class PendulumSimResult:
    states: np.ndarray
    controls: np.ndarray
    cost: float
    cumulative: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None
    diverged_reason: str | None = None
    max_gamma_used: float | None = None


def linearized_pendulum_plant(theta, params):
    """Forward-Euler discretization of the pendulum Jacobian at angle theta."""
    dt = params.dt
    k = params.mass * params.gravity * params.length / params.rot_inertia
    b = params.length / params.rot_inertia
    A = np.array([[1.0, dt], [dt * k * math.cos(theta), 1.0]])
    B = np.array([[0.0], [dt * b * math.cos(theta)]])
    return ControlPlant(A, B, B.copy(), np.eye(2), np.eye(1))


def _synthesize_family(plant, family, gamma, mode, adapt_gamma=False):
    """Synthesize one controller; returns (policy, gamma_used).

    With ``adapt_gamma``, an infeasible level is raised geometrically (10%
    steps) until feasible, so gain-scheduled deployments survive
    linearization points harder than the nominal one.
    """
    if family == "h2":
        return h2_synthesize(plant, mode=mode), None
    if family == "hinf":
        synth = hinf_synthesize
    elif family == "pathlength":
        synth = pathlength_synthesize
    else:
        raise ValueError(f"unknown controller family {family!r}")
    used = gamma
    while True:
        pol = synth(plant, used, mode=mode)
        if not isinstance(pol, FeasibilityReport):
            return pol, used
        if not adapt_gamma or used > 64.0 * gamma:
            raise InfeasibleSynthesis(
                f"{family} synthesis infeasible at gamma={used}: {pol.failed}"
            )
        used *= 1.1


def simulate_pendulum_mpc(params, family, w, gamma=None, mode=CAUSAL,
                          quant=1e-3, blowup=1e6, true_dynamics="nonlinear",
                          relinearize=True, offline_window=1000,
                          offline_every=100, adapt_gamma=True, x0=None):
    """Relinearize-synthesize-apply rollout on the pendulum.

    ``family`` is one of 'h2', 'hinf', 'pathlength', 'offline'.  Gains are
    cached per quantized linearization angle (grid ``quant`` radians) and
    the stateful policies carry their internal recursion state across gain
    swaps.  When the requested level is infeasible at some angle (the
    feasibility boundary moves with the linearization point), the level is
    raised locally just above that angle's boundary unless ``adapt_gamma``
    is disabled; the largest level used is reported in the result.

    The clairvoyant 'offline' family re-solves the finite-horizon problem
    on the current linearization every ``offline_every`` steps over a
    ``offline_window`` lookahead of the known disturbance, with the
    stationary Riccati matrix as terminal weight.

    With ``true_dynamics='linear'`` the rollout propagates the origin
    linearization instead of the pendulum, which makes the harness
    coincide with ``simulate_control`` when ``relinearize`` is off.

    Divergence (state beyond ``blowup``, or a synthesis failure at the
    current angle) is reported in the result, not raised.
    """
    w = as_signal(w, 1)
    T = w.shape[0]
    x = np.zeros(2) if x0 is None else np.asarray(x0, dtype=float).copy()
    states = np.empty((T + 1, 2))
    controls = np.zeros((T, 1))
    cumulative = np.empty(T)
    cache = {}
    terminal_cache = {}
    carried_state = None
    plan = None
    plan_start = 0
    origin_plant = linearized_pendulum_plant(0.0, params)
    dt = params.dt
    cost = 0.0
    diverged = False
    diverged_at = None
    diverged_reason = None
    max_gamma_used = gamma if family in ("hinf", "pathlength") else None

    for t in range(T):
        states[t] = x
        if abs(x[1]) > blowup or abs(x[0]) > blowup:
            diverged = True
            diverged_at = t
            diverged_reason = "state magnitude exceeded blowup cap"
            states[t:] = x
            cumulative[t:] = cost
            break
        theta_bin = 0.0 if not relinearize else round(x[0] / quant) * quant
        try:
            if family == "offline":
                if plan is None or t - plan_start >= offline_every or \
                        t - plan_start >= plan.shape[0]:
                    plant_t = (origin_plant if not relinearize
                               else linearized_pendulum_plant(theta_bin, params))
                    if theta_bin not in terminal_cache:
                        from .numerics import solve_dare
                        terminal_cache[theta_bin] = solve_dare(
                            plant_t.A, plant_t.B_u, plant_t.Q, plant_t.R).P
                    end = min(T, t + offline_window)
                    plan, _ = offline_optimal(plant_t, w[t:end], x0=x,
                                              terminal_weight=terminal_cache[theta_bin])
                    plan_start = t
                u = plan[t - plan_start]
            else:
                if theta_bin not in cache:
                    plant_t = (origin_plant if not relinearize
                               else linearized_pendulum_plant(theta_bin, params))
                    run_gamma = max_gamma_used if max_gamma_used is not None else gamma
                    cache[theta_bin] = _synthesize_family(
                        plant_t, family, run_gamma, mode, adapt_gamma=adapt_gamma)
                policy, used = cache[theta_bin]
                if used is not None and max_gamma_used is not None:
                    max_gamma_used = max(max_gamma_used, used)
                if carried_state is not None:
                    policy.state = carried_state
                else:
                    policy.reset()
                u = policy.step(x, w[t])
                carried_state = policy.state
        except (InfeasibleSynthesis, NoStabilizingSolution, NotStabilizable,
                NotDetectable) as exc:
            diverged = True
            diverged_at = t
            diverged_reason = f"synthesis failed at angle {theta_bin:.4f}: {exc}"
            states[t:] = x
            cumulative[t:] = cost
            break
        controls[t] = u
        cost += float(x @ x + u @ u)
        cumulative[t] = cost
        if true_dynamics == "linear":
            x = origin_plant.A @ x + origin_plant.B_u @ u + origin_plant.B_w @ w[t]
        else:
            th, thd = x
            drive = math.sin(th) + (float(u[0]) + float(w[t, 0])) * math.cos(th)
            x = np.array([th + dt * thd, thd + dt * drive])
    else:
        states[T] = x
        cost += float(x @ x)
    if diverged:
        states[T] = x
    return PendulumSimResult(states, controls, cost, cumulative, diverged,
                             diverged_at, diverged_reason, max_gamma_used)
