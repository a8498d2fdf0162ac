"""Shared fixtures and pointwise identity oracles for the test suite."""
import numpy as np
import pytest

from pathregret.xfer import (
    StateSpace,
    adjoint_evaluate,
    evaluate,
    invert,
    unit_circle_grid,
)


def make_h_system(io):
    """H(z) = C (zI - A)^{-1} B for the factored plant."""
    p, m = io.C.shape[0], io.B.shape[1]
    return StateSpace(io.A, io.B, io.C, np.zeros((p, m)))


def io_identity_residual(io, z_samples):
    """Worst relative residual of the two whitening identities on the grid."""
    H = make_h_system(io)
    worst = 0.0
    for z in z_samples:
        Hv = evaluate(H, z)
        Ha = adjoint_evaluate(H, z)
        d1 = evaluate(io.delta1, z)
        d1a = adjoint_evaluate(io.delta1, z)
        d2 = evaluate(io.delta2, z)
        d2a = adjoint_evaluate(io.delta2, z)
        rhs1 = np.eye(Hv.shape[1]) + Ha @ Hv
        rhs2 = np.eye(Hv.shape[0]) + Hv @ Ha
        worst = max(worst,
                    np.max(np.abs(d1a @ d1 - rhs1)) / (1 + np.max(np.abs(rhs1))),
                    np.max(np.abs(d2 @ d2a - rhs2)) / (1 + np.max(np.abs(rhs2))))
    return worst


def center_identity_residual(io, center, L, z_samples):
    """Worst relative residual of the center-factor identity on the grid."""
    from pathregret.xfer import compose

    L = np.atleast_2d(L)
    g = center.gamma
    J = StateSpace(io.A, io.B, L, np.zeros((L.shape[0], io.B.shape[1])))
    R = compose(J, invert(io.delta1))
    worst = 0.0
    for z in z_samples:
        Rv = evaluate(R, z)
        Ra = adjoint_evaluate(R, z)
        d3 = evaluate(center.delta3, z)
        d3a = adjoint_evaluate(center.delta3, z)
        rhs = np.eye(Rv.shape[0]) / g**2 + (Rv @ Ra) / g**4
        worst = max(worst,
                    np.max(np.abs(d3a @ d3 - rhs)) / (1 + np.max(np.abs(rhs))))
    return worst


def q_split_residual(io, center, qd, L, z_samples):
    """Worst relative residual of the three-part split against the product."""
    L = np.atleast_2d(L)
    J = StateSpace(io.A, io.B, L, np.zeros((L.shape[0], io.B.shape[1])))
    H = make_h_system(io)
    d2inv = invert(io.delta2)
    worst = 0.0
    for z in z_samples:
        Q = evaluate(J, z) @ adjoint_evaluate(H, z) @ adjoint_evaluate(d2inv, z)
        lhs = evaluate(center.delta3, z) @ Q
        rhs = (qd.constant_term + evaluate(qd.causal_part, z)
               + qd.anticausal_part.evaluate(z))
        worst = max(worst, np.max(np.abs(lhs - rhs)) / (1 + np.max(np.abs(lhs))))
    return worst


def control_identity_residual(plant, cf, z_samples):
    """Worst relative residual of the control-side factor identity."""
    g = cf.gamma
    F = StateSpace(plant.A, plant.B_u @ plant.R_sqrt_inv, plant.L,
                   np.zeros((plant.L.shape[0], plant.B_u.shape[1])))
    G = StateSpace(plant.A, plant.B_w, plant.L,
                   np.zeros((plant.L.shape[0], plant.B_w.shape[1])))
    p = plant.B_w.shape[1]
    worst = 0.0
    for z in z_samples:
        Fv = evaluate(F, z)
        Fa = adjoint_evaluate(F, z)
        Gv = evaluate(G, z)
        Ga = adjoint_evaluate(G, z)
        Dv = evaluate(cf.delta, z)
        Da = adjoint_evaluate(cf.delta, z)
        m2 = (1 - 1 / z) * (1 - z)
        rhs = g**2 * m2 * np.eye(p) + Ga @ np.linalg.solve(
            np.eye(Fv.shape[0]) + Fv @ Fa, Gv)
        worst = max(worst,
                    np.max(np.abs(Da @ Dv - rhs)) / (1 + np.max(np.abs(rhs))))
    return worst


def random_stable_matrix(rng, n, radius=0.9):
    M = rng.standard_normal((n, n))
    r = max(np.abs(np.linalg.eigvals(M)))
    return M * (radius / r) if r > 0 else M


def impulse_from_estimator(est, p, taps):
    """Impulse response of a causal estimator by direct time stepping."""
    r = np.atleast_1d(est.step(np.zeros(p))).shape[0]
    H = np.empty((taps, r, p))
    for j in range(p):
        est.reset()
        for t in range(taps):
            y = np.zeros(p)
            if t == 0:
                y[j] = 1.0
            H[t][:, j] = est.step(y)
    est.reset()
    return H


def impulse_from_transfer(K_ss, taps, n_fft=4096):
    """Impulse response by pointwise evaluation on an offset circle grid.

    The half-bin offset keeps removable unit-circle poles of non-minimal
    realizations off the grid; the modulated inverse FFT undoes the offset.
    """
    ks = np.arange(n_fft)
    zs = np.exp(2j * np.pi * (ks + 0.5) / n_fft)
    r, p = K_ss.D.shape
    vals = np.empty((n_fft, r, p), dtype=complex)
    for i, z in enumerate(zs):
        vals[i] = evaluate(K_ss, z)
    out = np.fft.ifft(vals, axis=0)
    out *= np.exp(1j * np.pi * ks / n_fft)[:, None, None]
    return np.real(out[:taps])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
