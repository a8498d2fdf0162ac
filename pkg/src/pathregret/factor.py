"""
Canonical spectral factorizations for the synthesis pipeline.

Given the strictly proper maps J(z) = L (zI-A)^{-1} B (disturbance to
target) and H(z) = C (zI-A)^{-1} B (disturbance to measurement), this
module produces state-space realizations of

  * the input/output whitening factors Delta1, Delta2 with
    Delta1* Delta1 = I + H*H and Delta2 Delta2* = I + H H*,
  * the center factor Delta3 with
    Delta3* Delta3 = g^{-2} I + g^{-4} (J Delta1^{-1})(J Delta1^{-1})*,
  * the causal/anticausal split of Delta3(z) Q(z),
    Q = J H* Delta2^{-*}, together with its DC anchors, and
  * the control-side factor Delta with
    Delta* Delta = g^2 M*M + G*(I + F F*)^{-1} G, where M(z) = (1-z) I.

Every factorization is assembled from verified Riccati/Stein solutions, so
the defining identities hold pointwise on the unit circle to solver
accuracy; the tests check them there explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSynthesis, NoStabilizingSolution, PoleHit
from .numerics import (
    as_matrix,
    invsqrtm_pd,
    solve_dare,
    solve_stein,
    solve_stein_sylvester,
    spectral_radius,
    sqrtm_psd,
    symmetrize,
)
from .xfer import AnticausalStateSpace, StateSpace, evaluate, invert


@dataclass(frozen=True)
class IoFactorization:
    """Whitening factors of I + H*H (input side) and I + HH* (output side)."""

    delta1: StateSpace
    delta2: StateSpace
    K1: np.ndarray
    K2: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    A1: np.ndarray  # A - B K1, stable
    A2: np.ndarray  # A - K2 C, stable
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class CenterFactorization:
    """Causal factor of g^{-2} I + g^{-4} R R* with R = J Delta1^{-1}."""

    delta3: StateSpace
    K3: np.ndarray
    Sigma3: np.ndarray
    P3: np.ndarray
    W1: np.ndarray
    Sigma0: np.ndarray
    gamma: float
    L: np.ndarray


@dataclass(frozen=True)
class QDecomposition:
    """Split of Delta3(z) Q(z) into constant, causal and anticausal parts.

    ``delta3q_at_1`` is the value of the full product at z = 1; it is None
    when the causal part has a pole there (plants with unit-circle modes),
    in which case only the finite anchor ``dc_anchor`` — the value at z = 1
    of the constant plus anticausal parts — is available.  The anchor is
    what the estimator recursion needs; it is always finite because it only
    involves the stable A2.
    """

    A_hat: np.ndarray
    B_hat: np.ndarray
    L_hat: np.ndarray
    W2: np.ndarray
    constant_term: np.ndarray
    causal_part: StateSpace
    anticausal_part: AnticausalStateSpace
    delta3q_at_1: np.ndarray | None
    dc_anchor: np.ndarray
    Sigma2_invsqrt: np.ndarray


@dataclass(frozen=True)
class ControlFactorization:
    """Control-side factor Delta and the data of its synthetic realization."""

    A_tilde: np.ndarray
    B_tilde_w: np.ndarray
    L_tilde: np.ndarray
    S_tilde: np.ndarray
    K2c: np.ndarray
    Sigma2c: np.ndarray
    P2c: np.ndarray
    delta: StateSpace
    delta_inverse: StateSpace
    gamma: float
    # output-side whitening data for I + F F*
    K1c: np.ndarray
    Sigma1c: np.ndarray
    P1c: np.ndarray
    A_K: np.ndarray  # A - K1c L, stable


def factor_io(A, B, C):
    """Whitening factorizations of I + H*H and I + HH* for H = C(zI-A)^{-1}B.

    Requires (A, B) stabilizable and (A, C) detectable; both Riccati
    equations are solved for their stabilizing solutions and the factors

        Delta1(z) = Sigma1^{1/2} (I + K1 (zI - A)^{-1} B)
        Delta2(z) = (I + C (zI - A)^{-1} K2) Sigma2^{1/2}

    are assembled with K1 = Sigma1^{-1} B'P1 A, Sigma1 = I + B'P1 B,
    K2 = A P2 C' Sigma2^{-1}, Sigma2 = I + C P2 C'.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]

    sol1 = solve_dare(A, B, C.T @ C, np.eye(m))
    P1 = sol1.P
    K1 = sol1.gain
    Sigma1 = sol1.innovation
    A1 = sol1.closed_loop

    sol2 = solve_dare(A.T, C.T, B @ B.T, np.eye(p))
    P2 = sol2.P
    K2 = sol2.gain.T  # A P2 C' Sigma2^{-1}
    Sigma2 = sol2.innovation
    A2 = sol2.closed_loop.T  # A - K2 C

    s1h = sqrtm_psd(Sigma1)
    s2h = sqrtm_psd(Sigma2)
    delta1 = StateSpace(A, B, s1h @ K1, s1h)
    delta2 = StateSpace(A, K2 @ s2h, C, s2h)
    return IoFactorization(delta1, delta2, K1, K2, Sigma1, Sigma2, P1, P2,
                           A1, A2, A, B, C)


def factor_center(io, L, gamma):
    """Causal factor Delta3 of g^{-2} I + g^{-4} R R*, R = J Delta1^{-1}.

    J(z) = L (zI - A)^{-1} B shares the (A, B) data of ``io``.  W1 solves
    the Stein equation W1 = A1 W1 A1' + g^{-2} B Sigma1^{-1} B', and
    (K3, Sigma3) come from the stabilizing solution of the cross-term
    Riccati equation on (A1, A1 W1 L') with weight Sigma0 = I + L W1 L'
    and cross term L'.
    """
    L = as_matrix(L, "L")
    A1 = io.A1
    B = io.B
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    r = L.shape[0]

    Sigma1_inv = np.linalg.inv(io.Sigma1)
    W1 = solve_stein(A1, symmetrize(B @ Sigma1_inv @ B.T) / gamma**2,
                     transpose=True)
    Sigma0 = symmetrize(np.eye(r) + L @ W1 @ L.T)
    Bq = A1 @ W1 @ L.T
    sol3 = solve_dare(A1, Bq, np.zeros_like(A1), Sigma0, S=L.T)
    P3 = sol3.P
    K3 = sol3.gain
    Sigma3 = sol3.innovation

    s3h = sqrtm_psd(Sigma3)
    delta3 = StateSpace(A1, Bq, (s3h @ K3) / gamma, s3h / gamma)
    return CenterFactorization(delta3, K3, Sigma3, P3, W1, Sigma0, gamma, L)


def decompose_q(io, center):
    """Causal/anticausal split of Delta3(z) Q(z), Q = J H* Delta2^{-*}.

    The product is realized on the augmented pair (A_hat, B_hat) with
    output map L_hat, and W2 solves the Stein-Sylvester equation
    W2 = A_hat W2 A2' + B_hat B'.  The three parts are

        constant:    L_hat W2 C' Sigma2^{-1/2}
        causal:      L_hat (zI - A_hat)^{-1} A_hat W2 C' Sigma2^{-1/2}
        anticausal:  L_hat W2 A2' (z^{-1}I - A2')^{-1} C' Sigma2^{-1/2}
    """
    A, B, C = io.A, io.B, io.C
    A1, A2 = io.A1, io.A2
    L = center.L
    W1 = center.W1
    gamma = center.gamma
    n = A.shape[0]
    s3h = sqrtm_psd(center.Sigma3)

    A_hat = np.block([[A1, A1 @ W1 @ L.T @ L], [np.zeros((n, n)), A]])
    B_hat = np.vstack([np.zeros_like(B), B])
    L_hat = np.hstack([(s3h @ center.K3) / gamma, (s3h @ L) / gamma])

    W2 = solve_stein_sylvester(A_hat, A2, B_hat @ B.T)
    s2_invh = invsqrtm_pd(io.Sigma2)
    G_col = C.T @ s2_invh

    constant = L_hat @ W2 @ G_col
    causal = StateSpace(A_hat, A_hat @ W2 @ G_col, L_hat,
                        np.zeros((L_hat.shape[0], G_col.shape[1])))
    anticausal = AnticausalStateSpace(A2.T, G_col, L_hat @ W2 @ A2.T)

    # Finite DC anchor: constant + anticausal evaluated at z = 1.  Uses only
    # the strictly stable A2, so it exists even when A has unit-circle modes.
    dc_anchor = L_hat @ W2 @ np.linalg.solve(np.eye(n) - A2.T, G_col)

    try:
        delta3q_at_1 = np.real(
            constant + evaluate(causal, 1.0) + anticausal.evaluate(1.0)
        )
    except PoleHit:
        delta3q_at_1 = None

    return QDecomposition(A_hat, B_hat, L_hat, W2, constant, causal,
                          anticausal, delta3q_at_1, dc_anchor, s2_invh)


def factor_control(plant, gamma):
    """Control-side canonical factorization at level ``gamma``.

    ``plant`` provides A, B_u, B_w, the cost square roots L (L'L = Q) and
    R^{1/2}.  With F = L(zI-A)^{-1} B_u R^{-1/2} and G = L(zI-A)^{-1} B_w,
    builds the causal, causally invertible Delta with

        Delta* Delta = g^2 M*M + G*(I + F F*)^{-1} G,   M(z) = (1 - z) I.

    First the output-side whitening of I + FF* is computed, then the
    cross-term Riccati equation on the augmented pair (A_tilde, B_tilde_w)
    yields (K2, Sigma2) and Delta(z) = Sigma2^{1/2}(I + K2 (zI - A_tilde)^{-1}
    B_tilde_w).  Raises InfeasibleSynthesis when no stabilizing solution
    with invertible Sigma2 exists.
    """
    A = plant.A
    B_w = plant.B_w
    L = plant.L
    Buv = plant.B_u @ plant.R_sqrt_inv
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = A.shape[0]
    p = B_w.shape[1]
    r = L.shape[0]

    # Output-side whitening of I + F F*: Delta1(z) = (I + L (zI-A)^{-1} K1) Sigma1^{1/2}.
    sol1 = solve_dare(A.T, L.T, Buv @ Buv.T, np.eye(r))
    P1c = sol1.P
    Sigma1c = sol1.innovation
    K1c = sol1.gain.T  # A P1 L' Sigma1^{-1}
    A_K = sol1.closed_loop.T  # A - K1c L

    s1_invh = invsqrtm_pd(Sigma1c)
    A_tilde = np.zeros((n + p, n + p))
    A_tilde[:n, :n] = A_K
    B_tilde_w = np.vstack([B_w, -np.eye(p)])
    L_tilde = np.block([
        [s1_invh @ L, np.zeros((r, p))],
        [np.zeros((p, n)), gamma * np.eye(p)],
    ])
    S_tilde = np.vstack([np.zeros((n, p)), gamma**2 * np.eye(p)])

    Q_tilde = symmetrize(L_tilde.T @ L_tilde)
    R_dare = gamma**2 * np.eye(p)
    marginal = False
    try:
        sol2 = solve_dare(A_tilde, B_tilde_w, Q_tilde, R_dare, S=S_tilde)
    except NoStabilizingSolution:
        # Spectra with unit-circle zeros (e.g. G == 0) only admit a
        # semi-stabilizing factor whose inverse is marginally causal.
        try:
            sol2 = solve_dare(A_tilde, B_tilde_w, Q_tilde, R_dare, S=S_tilde,
                              allow_marginal=True)
            marginal = True
        except NoStabilizingSolution as exc:
            raise InfeasibleSynthesis(
                f"control factorization has no stabilizing solution at "
                f"gamma={gamma}: {exc}"
            ) from exc
    P2c = sol2.P
    K2c = sol2.gain
    Sigma2c = sol2.innovation
    if np.linalg.cond(Sigma2c) > 1e12:
        raise InfeasibleSynthesis("Sigma2 is singular in the control factorization")

    s2h = sqrtm_psd(Sigma2c)
    delta = StateSpace(A_tilde, B_tilde_w, s2h @ K2c, s2h)
    delta_inverse = invert(delta)
    if not marginal and spectral_radius(delta_inverse.A) >= 1.0:
        raise InfeasibleSynthesis("Delta inverse is not causal-stable")
    return ControlFactorization(A_tilde, B_tilde_w, L_tilde, S_tilde, K2c,
                                Sigma2c, P2c, delta, delta_inverse, gamma,
                                K1c, Sigma1c, P1c, A_K)
