"""
Estimator synthesis.

Provides the steady-state Kalman filter, the noncausal smoothed oracle,
a state-space solver for the best-causal-approximation (Nehari) problem,
and the pathlength-adaptive filter assembled from the spectral
factorizations in ``factor``:

    K(z) = Delta3^{-1}(z) [ C0 + D(z) + (1 - z^{-1}) Khat(z) ] Delta2^{-1}(z)

where D(z) is the strictly causal part of Delta3 Q and C0 is the value at
z = 1 of the remaining (constant plus anticausal) part.  Written this way
every term is realized on strictly stable dynamics even when the plant has
unit-circle modes; the grouping is algebraically identical to anchoring the
full product at z = 1 and differencing the causal completion, and the
equivalence is pinned down by an impulse-response test against the
frequency-domain evaluation of K.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import FeasibilityReport, check_detectable, check_stabilizable
from .errors import DimensionMismatch, GammaTooSmall, SingularPivot, UnstableF
from .factor import decompose_q, factor_center, factor_io
from .numerics import (
    as_matrix,
    invsqrtm_pd,
    max_singular_value,
    solve_stein,
    spectral_radius,
)
from .xfer import AnticausalStateSpace, StateSpace, add, compose


@dataclass(frozen=True)
class FilterPlant:
    """Discrete LTI estimation model x+ = A x + B w, y = C x + v, s = L x."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        L = as_matrix(self.L, "L")
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n:
            raise DimensionMismatch("A and B must share the state dimension")
        if C.shape[1] != n or L.shape[1] != n:
            raise DimensionMismatch("C and L must have one column per state")
        check_stabilizable(A, B, "(A, B)")
        check_detectable(A, C, "(A, C)")
        for name, val in (("A", A), ("B", B), ("C", C), ("L", L)):
            object.__setattr__(self, name, val)

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_disturbances(self):
        return self.B.shape[1]

    @property
    def n_measurements(self):
        return self.C.shape[0]

    @property
    def n_targets(self):
        return self.L.shape[0]


class KalmanFilter:
    """Steady-state filtered estimator.

    Predictor update xhat+ = A xhat + K2 (y - C xhat) with the stationary
    gain K2 = A P2 C' Sigma2^{-1}; the emitted estimate uses the current
    measurement through the filtered correction P2 C' Sigma2^{-1}.
    """

    def __init__(self, plant, K2, P2, Sigma2):
        self.A = plant.A
        self.C = plant.C
        self.L = plant.L
        self.K2 = K2
        self.M = P2 @ plant.C.T @ np.linalg.inv(Sigma2)
        self.xhat = np.zeros(plant.n_states)

    def reset(self):
        self.xhat[:] = 0.0

    @property
    def state(self):
        return (self.xhat.copy(),)

    @state.setter
    def state(self, value):
        self.xhat = np.asarray(value[0], dtype=float).copy()

    def step(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        innov = y - self.C @ self.xhat
        shat = self.L @ (self.xhat + self.M @ innov)
        self.xhat = self.A @ self.xhat + self.K2 @ innov
        return shat


def kalman_synthesize(plant):
    """Steady-state Kalman filter from the stationary estimation Riccati solution."""
    io = factor_io(plant.A, plant.B, plant.C)
    return KalmanFilter(plant, io.K2, io.P2, io.Sigma2)


@dataclass(frozen=True)
class NehariData:
    """Solution data for the best causal approximation of T(z) = H (z^{-1}I - F)^{-1} G.

    ``gamma_star`` is the smallest achievable sup-norm distance
    max-singular-value of (Z Pi); ``K_hat`` realizes a causal approximant
    at the requested level.
    """

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Z: np.ndarray
    Pi: np.ndarray
    Z_gamma: np.ndarray
    gamma_star: float
    K_hat: StateSpace
    F_gamma: np.ndarray
    K_gamma: np.ndarray
    T: AnticausalStateSpace


def nehari_solve(F, G, H, gamma):
    """Causal approximant of a strictly anticausal transfer matrix.

    Given T(z) = H (z^{-1}I - F)^{-1} G with spectral_radius(F) < 1,
    computes the Gramians Z = F'ZF + H'H and Pi = F Pi F' + GG', the
    optimum gamma_star = max_singular_value(Z Pi), and for
    gamma >= gamma_star the causal

        K_hat(z) = H Pi (I + F_g (zI - F_g)^{-1}) K_g,
        K_g = (I - F' Z_g F Pi)^{-1} F' Z_g G,   F_g = F' - K_g G',

    with Z_g solving Z_g = F'Z_g F + gamma^{-2} H'H, which satisfies
    sup_z ||K_hat(z) - T(z)|| <= gamma on the unit circle.

    Raises GammaTooSmall below gamma_star, UnstableF for unstable F, and
    SingularPivot when the K_g pivot is singular.
    """
    F = as_matrix(F, "F")
    G = as_matrix(G, "G")
    H = as_matrix(H, "H")
    gamma = float(gamma)
    if spectral_radius(F) >= 1.0:
        raise UnstableF("Nehari data requires a stable F")

    Z = solve_stein(F, H.T @ H)
    Pi = solve_stein(F, G @ G.T, transpose=True)
    gamma_star = max_singular_value(Z @ Pi)
    if gamma < gamma_star * (1.0 - 1e-12):
        raise GammaTooSmall(
            f"gamma={gamma:.6g} is below the optimum {gamma_star:.6g}"
        )
    Z_gamma = solve_stein(F, (H.T @ H) / gamma**2)

    pivot = np.eye(F.shape[0]) - F.T @ Z_gamma @ F @ Pi
    if np.linalg.cond(pivot) > 1e12:
        raise SingularPivot("causal-approximation pivot is singular")
    K_gamma = np.linalg.solve(pivot, F.T @ Z_gamma @ G)
    F_gamma = F.T - K_gamma @ G.T
    HPi = H @ Pi
    K_hat = StateSpace(F_gamma, K_gamma, HPi @ F_gamma, HPi @ K_gamma)
    T = AnticausalStateSpace(F, G, H)
    return NehariData(F, G, H, Z, Pi, Z_gamma, gamma_star, K_hat, F_gamma,
                      K_gamma, T)


class PathlengthFilter:
    """Stateful recursion of the pathlength-adaptive estimator.

    Stages, per measurement y_t:

      whiten       e+ = A2 e + K2 y,         zeta = Sigma2^{-1/2} (y - C e)
      approximant  xi1+ = F_g xi1 + K_g zeta
      split state  xi2+ = A_hat xi2 + A_hat W2 C' Sigma2^{-1/2} zeta
      combine      beta = C0 zeta + L_hat xi2 + H Pi (xi1+ - xi1)
      unwhiten     s_hat = g Sigma3^{-1/2} beta - K3 pi,
                   pi+ = (A1 - A1 W1 L' K3) pi + g A1 W1 L' Sigma3^{-1/2} beta

    xi2 carries the strictly causal part of the split product; C0 is the
    value at z = 1 of the rest of it (constant plus anticausal), so the
    middle stage realizes "anchor at DC plus differenced causal
    approximant" with every inverse taken on strictly stable matrices.
    The difference of consecutive approximant outputs starts from a zero
    predecessor at reset.  The matrices the construction requires to be
    stable (A2, F_gamma, the pi loop) are verified at synthesis.
    """

    def __init__(self, mats, diagnostics=None):
        self.m = mats
        self.diagnostics = diagnostics or {}
        self.e = np.zeros(mats["A2"].shape[0])
        self.xi1 = np.zeros(mats["F_gamma"].shape[0])
        self.xi2 = np.zeros(mats["A_hat"].shape[0])
        self.pi = np.zeros(mats["A_pi"].shape[0])

    def reset(self):
        self.e[:] = 0.0
        self.xi1[:] = 0.0
        self.xi2[:] = 0.0
        self.pi[:] = 0.0

    @property
    def state(self):
        return (self.e.copy(), self.xi1.copy(), self.xi2.copy(), self.pi.copy())

    @state.setter
    def state(self, value):
        e, xi1, xi2, pi = value
        self.e = np.asarray(e, dtype=float).copy()
        self.xi1 = np.asarray(xi1, dtype=float).copy()
        self.xi2 = np.asarray(xi2, dtype=float).copy()
        self.pi = np.asarray(pi, dtype=float).copy()

    def step(self, y):
        m = self.m
        y = np.atleast_1d(np.asarray(y, dtype=float))
        zeta = m["Sigma2_invsqrt"] @ (y - m["C"] @ self.e)
        xi1_next = m["F_gamma"] @ self.xi1 + m["K_gamma"] @ zeta
        beta = m["C0"] @ zeta + m["L_hat"] @ self.xi2 + m["HPi"] @ (xi1_next - self.xi1)
        shat = m["D_out"] @ beta - m["K3"] @ self.pi
        self.e = m["A2"] @ self.e + m["K2"] @ y
        self.xi2 = m["A_hat"] @ self.xi2 + m["B_xi2"] @ zeta
        self.xi1 = xi1_next
        self.pi = m["A_pi"] @ self.pi + m["B_pi"] @ beta
        return shat

    def transfer(self):
        """Causal state-space realization of the measurement-to-estimate map.

        Assembles the frequency-domain counterpart of the recursion,
        Delta3^{-1} [C0 + D(z) + (1 - z^{-1}) K_hat(z)] Delta2^{-1}, where
        D is the strictly causal part of the split product.
        """
        m = self.m
        r, p = m["C0"].shape
        delta2_inv = StateSpace(m["A2"], m["K2"], -m["Sigma2_invsqrt"] @ m["C"],
                                m["Sigma2_invsqrt"])
        const = StateSpace.from_gain(m["C0"])
        causal = StateSpace(m["A_hat"], m["B_xi2"], m["L_hat"], np.zeros((r, p)))
        n1 = m["F_gamma"].shape[0]
        khat_diff = StateSpace(m["F_gamma"], m["K_gamma"],
                               -m["HPi"] @ (np.eye(n1) - m["F_gamma"]),
                               m["HPi"] @ m["K_gamma"])
        middle = add(add(const, causal), khat_diff)
        delta3_inv = StateSpace(m["A_pi"], m["B_pi"], -m["K3"], m["D_out"])
        return compose(delta3_inv, compose(middle, delta2_inv))


def pathlength_filter_synthesize(plant, gamma):
    """Estimator whose regret is bounded by gamma^2 (energy(w) + pathlength(v)).

    Runs the factorization pipeline (whitening, center factor at the given
    level, causal/anticausal split), forms the anticausal residue data

        F = A2',  G = C' Sigma2^{-1/2},  H = L_hat W2 A2' (I - A2')^{-1},

    and solves the level-1 best-causal-approximation problem.  Feasible iff
    max_singular_value(Z Pi) <= 1; returns a PathlengthFilter, else a
    FeasibilityReport carrying the attained value.
    """
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    io = factor_io(plant.A, plant.B, plant.C)
    center = factor_center(io, plant.L, gamma)
    qd = decompose_q(io, center)

    n = plant.n_states
    A2 = io.A2
    F = A2.T
    G = plant.C.T @ qd.Sigma2_invsqrt
    Hn = qd.L_hat @ qd.W2 @ A2.T @ np.linalg.inv(np.eye(n) - A2.T)

    Z = solve_stein(F, Hn.T @ Hn)
    Pi = solve_stein(F, G @ G.T, transpose=True)
    sigma = max_singular_value(Z @ Pi)
    if sigma > 1.0:
        return FeasibilityReport(False, "nehari", {"sigma_max_ZPi": sigma,
                                                   "gamma": gamma})
    nd = nehari_solve(F, G, Hn, 1.0)

    s3_invh = invsqrtm_pd(center.Sigma3)
    A1 = io.A1
    W1 = center.W1
    K3 = center.K3
    L = plant.L
    A_pi = A1 - A1 @ W1 @ L.T @ K3
    B_pi = gamma * (A1 @ W1 @ L.T @ s3_invh)
    mats = {
        "A2": A2,
        "K2": io.K2,
        "C": plant.C,
        "Sigma2_invsqrt": qd.Sigma2_invsqrt,
        "F_gamma": nd.F_gamma,
        "K_gamma": nd.K_gamma,
        "HPi": Hn @ nd.Pi,
        "A_hat": qd.A_hat,
        "B_xi2": qd.A_hat @ qd.W2 @ G,
        "L_hat": qd.L_hat,
        "C0": qd.dc_anchor,
        "A_pi": A_pi,
        "B_pi": B_pi,
        "D_out": gamma * s3_invh,
        "K3": K3,
    }
    diagnostics = {
        "gamma": gamma,
        "sigma_max_ZPi": sigma,
        "nehari_gamma_star": nd.gamma_star,
        "radius_A2": spectral_radius(A2),
        "radius_F_gamma": spectral_radius(nd.F_gamma),
        "radius_pi_loop": spectral_radius(A_pi),
        "delta3q_at_1": qd.delta3q_at_1,
        "dc_anchor": qd.dc_anchor,
    }
    return PathlengthFilter(mats, diagnostics)


def pathlength_gamma_feasible(plant, gamma):
    """Feasibility predicate used by the level bisection."""
    io = factor_io(plant.A, plant.B, plant.C)
    center = factor_center(io, plant.L, gamma)
    qd = decompose_q(io, center)
    n = plant.n_states
    F = io.A2.T
    G = plant.C.T @ qd.Sigma2_invsqrt
    Hn = qd.L_hat @ qd.W2 @ io.A2.T @ np.linalg.inv(np.eye(n) - io.A2.T)
    Z = solve_stein(F, Hn.T @ Hn)
    Pi = solve_stein(F, G @ G.T, transpose=True)
    return max_singular_value(Z @ Pi) <= 1.0


def smoothed_oracle(plant, y):
    """Noncausal smoothed estimates from the full measurement record.

    Finds the disturbance record w minimizing ||w||^2 + ||y - C x(w)||^2
    over the horizon (the maximum-plausibility split of y into state
    excitation and measurement noise) by the same block-tridiagonal
    elimination as the offline control oracle, then returns s_hat = L x(w).
    """
    from .control import _lq_affine_solve

    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] != plant.n_measurements:
        y = y.reshape(-1, plant.n_measurements)
    T = y.shape[0]
    n = plant.n_states
    Q = plant.C.T @ plant.C
    q_lin = -(y @ plant.C)
    drive = np.zeros((T, n))
    controls, states, _ = _lq_affine_solve(
        plant.A, plant.B, Q, np.eye(plant.n_disturbances), drive, q_lin,
        np.zeros((n, n)), np.zeros(n)
    )
    return states[:T] @ plant.L.T


def filter_regret_check(plant, estimator, w, v, gamma):
    """Simulated regret against the smoothed oracle, and its certified bound.

    Generates the trajectory driven by (w, v), runs the causal estimator and
    the smoothed oracle on the same measurement record, and returns
    (regret, bound) with regret = ||s_hat - s||^2 - ||s_oracle - s||^2 and
    bound = gamma^2 (energy(w) + pathlength(v)).
    """
    from .sim import energy, pathlength, simulate_filter

    w = np.atleast_2d(np.asarray(w, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if w.shape[1] != plant.n_disturbances:
        w = w.reshape(-1, plant.n_disturbances)
    if v.shape[1] != plant.n_measurements:
        v = v.reshape(-1, plant.n_measurements)
    if w.shape[0] != v.shape[0]:
        raise DimensionMismatch("w and v must share the horizon")

    result = simulate_filter(plant, estimator, w, v)
    shat0 = smoothed_oracle(plant, result.measurements)
    oracle_err = float(np.sum((shat0 - result.targets) ** 2))
    regret = result.total_error - oracle_err
    bound = gamma**2 * (energy(w) + pathlength(v))
    return regret, bound
