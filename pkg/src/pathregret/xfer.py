"""
State-space transfer-matrix algebra.

A rational transfer matrix D + C (zI - A)^{-1} B is represented by its
realization only; construction, pointwise evaluation at complex z,
para-Hermitian adjoint evaluation, inversion and series/parallel
composition all stay in realization form.  Strictly anticausal pieces
H (z^{-1}I - F)^{-1} G get their own small type.

The module also houses the displacement-identity residual checkers used
as pointwise oracles by the factorization tests: for stacked resolvents
[H1 (zI-F1)^{-1}  I] and [(z^{-1}I - F2')^{-1} H2' ; I] the sandwich with

    Omega(W) = [[-W + F1 W F2',  F1 W H2'],
                [ H1 W F2',      H1 W H2']]

vanishes identically in z for every W, and its two Hermitian
specializations vanish for every Hermitian P.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, PoleHit, SingularD
from .numerics import as_matrix, spectral_radius

_POLE_RTOL = 1e-12


@dataclass(frozen=True)
class StateSpace:
    """Realization of the causal rational matrix D + C (zI - A)^{-1} B."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        D = as_matrix(self.D, "D")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        if B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch("B/C state dimensions do not match A")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch("D must be (outputs x inputs)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    @property
    def causal_stable(self):
        """True when all poles are strictly inside the unit circle."""
        return self.n_states == 0 or spectral_radius(self.A) < 1.0

    def poles(self):
        if self.n_states == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.A)

    @classmethod
    def from_gain(cls, D):
        """Static (state-free) gain."""
        D = as_matrix(D, "D")
        n0 = np.zeros((0, 0))
        return cls(n0, np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D)

    @classmethod
    def identity(cls, size):
        return cls.from_gain(np.eye(size))


@dataclass(frozen=True)
class AnticausalStateSpace:
    """Strictly anticausal rational matrix H (z^{-1}I - F)^{-1} G."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        F = as_matrix(self.F, "F")
        G = as_matrix(self.G, "G")
        H = as_matrix(self.H, "H")
        n = F.shape[0]
        if F.shape != (n, n) or G.shape[0] != n or H.shape[1] != n:
            raise DimensionMismatch("anticausal realization shapes are inconsistent")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)

    def evaluate(self, z):
        z = complex(z)
        n = self.F.shape[0]
        M = (1.0 / z) * np.eye(n) - self.F
        _check_invertible(M, z)
        return self.H @ np.linalg.solve(M, self.G.astype(complex))


def _check_invertible(M, z):
    if M.shape[0] == 0:
        return
    svals = np.linalg.svd(M, compute_uv=False)
    if svals[-1] <= _POLE_RTOL * max(svals[0], 1.0):
        raise PoleHit(f"evaluation point z={z} is a pole to tolerance")


def evaluate(G, z):
    """Value of the transfer matrix at complex z: D + C (zI - A)^{-1} B."""
    z = complex(z)
    if G.n_states == 0:
        return G.D.astype(complex)
    M = z * np.eye(G.n_states) - G.A
    _check_invertible(M, z)
    return G.D + G.C @ np.linalg.solve(M, G.B.astype(complex))


def adjoint_evaluate(G, z):
    """Value of the para-Hermitian adjoint G*(z^{-*}) at z.

    Equals the conjugate transpose of evaluate(G, 1/conj(z)); on the unit
    circle this reduces to evaluate(G, z)*.
    """
    z = complex(z)
    if z == 0:
        raise PoleHit("adjoint evaluation at z=0 is not defined")
    return evaluate(G, 1.0 / np.conj(z)).conj().T


def invert(G):
    """Realization of the inverse transfer matrix.

    Requires a square, invertible feedthrough D; the inverse realization is
    {A - B D^{-1} C, B D^{-1}, -D^{-1} C, D^{-1}}.
    """
    D = G.D
    if D.shape[0] != D.shape[1]:
        raise SingularD("inversion requires a square feedthrough matrix")
    if D.shape[0] and np.linalg.cond(D) > 1e12:
        raise SingularD("feedthrough matrix is singular to tolerance")
    Dinv = np.linalg.inv(D) if D.shape[0] else D
    return StateSpace(G.A - G.B @ Dinv @ G.C, G.B @ Dinv, -Dinv @ G.C, Dinv)


def compose(G1, G2):
    """Series realization of the product G1(z) G2(z)."""
    if G1.n_inputs != G2.n_outputs:
        raise DimensionMismatch("compose: G1 inputs must match G2 outputs")
    n1, n2 = G1.n_states, G2.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = G1.A
    A[:n1, n1:] = G1.B @ G2.C
    A[n1:, n1:] = G2.A
    B = np.vstack([G1.B @ G2.D, G2.B])
    C = np.hstack([G1.C, G1.D @ G2.C])
    D = G1.D @ G2.D
    return StateSpace(A, B, C, D)


def add(G1, G2):
    """Parallel realization of the sum G1(z) + G2(z)."""
    if G1.n_inputs != G2.n_inputs or G1.n_outputs != G2.n_outputs:
        raise DimensionMismatch("add: shapes must agree")
    n1, n2 = G1.n_states, G2.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = G1.A
    A[n1:, n1:] = G2.A
    B = np.vstack([G1.B, G2.B])
    C = np.hstack([G1.C, G2.C])
    return StateSpace(A, B, C, G1.D + G2.D)


def unit_circle_grid(count=64, avoid=(), pole_tol=1e-6):
    """Equispaced points on the unit circle, excluding near-pole samples.

    ``avoid`` is an iterable of StateSpace/AnticausalStateSpace whose poles
    (and reciprocal poles, for anticausal parts) define exclusion disks of
    radius ``pole_tol``.
    """
    z = np.exp(2j * np.pi * np.arange(count) / count)
    bad = []
    for G in avoid:
        if isinstance(G, AnticausalStateSpace):
            eigs = np.linalg.eigvals(G.F) if G.F.size else np.zeros(0, complex)
            with np.errstate(divide="ignore", invalid="ignore"):
                eigs = np.where(np.abs(eigs) > 0, 1.0 / eigs, np.inf)
        else:
            eigs = G.poles()
        bad.extend(eigs[np.isfinite(eigs)])
    if bad:
        bad = np.asarray(bad)
        keep = np.array([np.min(np.abs(zi - bad)) > pole_tol for zi in z])
        z = z[keep]
    return z


def _omega_block(H1, F1, H2, F2, W):
    top = np.hstack([-W + F1 @ W @ F2.T, F1 @ W @ H2.T])
    bot = np.hstack([H1 @ W @ F2.T, H1 @ W @ H2.T])
    return np.vstack([top, bot])


def check_omega_identity(H1, F1, H2, F2, W, z_samples):
    """Max absolute entry of the general displacement identity over samples.

    Evaluates [H1 (zI-F1)^{-1}  I] Omega(W) [(z^{-1}I-F2')^{-1} H2' ; I]
    at each sample; the result is identically zero in exact arithmetic, so
    the returned residual measures numerical error only.
    """
    H1 = as_matrix(H1, "H1")
    F1 = as_matrix(F1, "F1")
    H2 = as_matrix(H2, "H2")
    F2 = as_matrix(F2, "F2")
    W = as_matrix(W, "W")
    n1 = F1.shape[0]
    n2 = F2.shape[0]
    if H1.shape[1] != n1 or H2.shape[1] != n2 or W.shape != (n1, n2):
        raise DimensionMismatch("displacement identity operands are inconsistent")
    omega = _omega_block(H1, F1, H2, F2, W)
    p1 = H1.shape[0]
    p2 = H2.shape[0]
    worst = 0.0
    for z in z_samples:
        z = complex(z)
        M1 = z * np.eye(n1) - F1
        M2 = (1.0 / z) * np.eye(n2) - F2.T
        _check_invertible(M1, z)
        _check_invertible(M2, z)
        left = np.hstack([H1 @ np.linalg.inv(M1), np.eye(p1)])
        right = np.vstack([np.linalg.solve(M2, H2.T.astype(complex)), np.eye(p2)])
        worst = max(worst, float(np.max(np.abs(left @ omega @ right))))
    return worst


def check_omega_identity_output(H, F, P, z_samples):
    """Hermitian specialization with the output-side resolvent pattern.

    [H (zI-F)^{-1}  I] Omega(P) [(z^{-1}I-F')^{-1} H' ; I] with Hermitian P.
    """
    return check_omega_identity(H, F, H, F, P, z_samples)


def check_omega_identity_input(H, F, P, z_samples):
    """Hermitian specialization with the input-side (transposed) pattern.

    [H' (z^{-1}I-F')^{-1}  I] Omega(P) [(zI-F)^{-1} H ; I] with
    Omega(P) = [[-P + F'PF, F'PH], [H'PF, H'PH]]; here H feeds the state
    (one column per channel), so it has shape (states x channels).
    """
    H = as_matrix(H, "H")
    F = as_matrix(F, "F")
    inv_samples = [1.0 / complex(z) for z in z_samples]
    return check_omega_identity(H.T, F.T, H.T, F.T, P, inv_samples)
