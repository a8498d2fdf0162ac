"""
Certified solvers for the matrix equations behind every synthesis step.

Covers stabilizing discrete algebraic Riccati equations (definite and
indefinite, with optional cross term), Stein equations X = F'XF + W and
their transposed variant, two-sided Stein-Sylvester equations
X = A1 X A2' + C, and small spectral utilities (spectral radius, largest
singular value, inertia, symmetric matrix square roots).

Riccati equations are solved through the stable deflating subspace of the
extended symplectic pencil (ordered QZ).  Every returned solution is
verified: residuals are checked against a tolerance and closed loops are
checked for strict stability, so a returned value can be trusted without
re-derivation downstream.  Returned Hermitian matrices are explicitly
symmetrized, since later Cholesky-style square roots require exact symmetry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import (
    DimensionMismatch,
    NoStabilizingSolution,
    NotHermitian,
    SingularEquation,
    UnstableF,
)

#: Stein equations of dimension at most this are solved by vectorization.
STEIN_KRON_LIMIT = 50


def as_matrix(M, name="matrix"):
    """Coerce to a 2-D float array and reject non-finite entries."""
    arr = np.atleast_2d(np.asarray(M, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def symmetrize(M):
    """Return (M + M') / 2."""
    return 0.5 * (M + M.T)


def spectral_radius(M):
    """Largest eigenvalue magnitude of a square matrix."""
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch("spectral radius requires a square matrix")
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def max_singular_value(M):
    """Largest singular value of a (possibly rectangular) matrix."""
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def is_hermitian(M, tol=1e-8):
    M = np.asarray(M)
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    return bool(np.max(np.abs(M - M.T)) <= tol * scale) if M.size else True


@dataclass(frozen=True)
class Inertia:
    """Eigenvalue sign counts (positive, negative, zero) of a Hermitian matrix."""

    n_pos: int
    n_neg: int
    n_zero: int

    def __iter__(self):
        return iter((self.n_pos, self.n_neg, self.n_zero))


def inertia(M, tol=1e-9):
    """Inertia of a Hermitian matrix.

    Eigenvalues within ``tol * max(1, |eig|_max)`` of zero are counted as
    zero.  Raises NotHermitian for asymmetric input.
    """
    M = as_matrix(M, "inertia argument")
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch("inertia requires a square matrix")
    if not is_hermitian(M):
        raise NotHermitian("inertia requires a Hermitian matrix")
    eigs = np.linalg.eigvalsh(symmetrize(M))
    scale = max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 1.0)
    cut = tol * scale
    n_pos = int(np.sum(eigs > cut))
    n_neg = int(np.sum(eigs < -cut))
    return Inertia(n_pos, n_neg, M.shape[0] - n_pos - n_neg)


def sqrtm_psd(M, tol=1e-10):
    """Symmetric square root of a Hermitian PSD matrix via eigendecomposition."""
    M = as_matrix(M, "sqrtm argument")
    if not is_hermitian(M):
        raise NotHermitian("matrix square root requires a Hermitian matrix")
    vals, vecs = np.linalg.eigh(symmetrize(M))
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    if vals.size and vals.min() < -tol * scale:
        raise ValueError(f"matrix is not PSD: min eigenvalue {vals.min():.3e}")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return symmetrize((vecs * root) @ vecs.T)


def invsqrtm_pd(M, tol=1e-12):
    """Inverse symmetric square root of a Hermitian PD matrix."""
    M = as_matrix(M, "invsqrtm argument")
    if not is_hermitian(M):
        raise NotHermitian("matrix square root requires a Hermitian matrix")
    vals, vecs = np.linalg.eigh(symmetrize(M))
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    if vals.size == 0 or vals.min() <= tol * scale:
        raise ValueError("matrix is not positive definite")
    return symmetrize((vecs / np.sqrt(vals)) @ vecs.T)


@dataclass(frozen=True)
class RiccatiSolution:
    """Verified stabilizing Riccati solution.

    ``innovation`` is R + B'PB (plus the signature block for indefinite
    problems), ``closed_loop`` is A - B @ gain, and ``residual_norm`` is the
    Frobenius norm of the defining equation evaluated at P.
    """

    P: np.ndarray
    gain: np.ndarray
    innovation: np.ndarray
    closed_loop: np.ndarray
    residual_norm: float


@dataclass(frozen=True)
class IndefiniteDareResult:
    """Indefinite-DARE solution plus the feasibility data the caller must check."""

    solution: RiccatiSolution
    r_inertia: Inertia
    h_inertia: Inertia
    inertia_match: bool
    closed_loop_stable: bool
    p_psd: bool

    @property
    def all_conditions(self):
        return self.inertia_match and self.closed_loop_stable and self.p_psd


def _dare_via_pencil(A, B, Q, R, S, allow_marginal=False):
    """Stable deflating subspace of the extended symplectic pencil.

    Returns the (symmetrized) solution of
        P = Q + A'PA - (A'PB + S)(R + B'PB)^{-1}(B'PA + S')
    without any feasibility post-checks; those belong to the callers.
    With ``allow_marginal`` the selection uses the closed unit disk, which
    admits semi-stabilizing factors whose closed loop touches the circle
    (spectra with unit-circle zeros); the caller's residual check certifies
    that the deflation was valid.
    """
    n = A.shape[0]
    m = B.shape[1]
    H = np.zeros((2 * n + m, 2 * n + m))
    J = np.zeros_like(H)
    H[:n, :n] = A
    H[:n, 2 * n:] = B
    H[n:2 * n, :n] = -Q
    H[n:2 * n, n:2 * n] = np.eye(n)
    H[n:2 * n, 2 * n:] = -S
    H[2 * n:, :n] = S.T
    H[2 * n:, 2 * n:] = R
    J[:n, :n] = np.eye(n)
    J[n:2 * n, n:2 * n] = A.T
    J[2 * n:, n:2 * n] = -B.T

    if not allow_marginal:
        # The balanced LAPACK-backed solver is markedly more robust on badly
        # scaled data; fall through to the raw pencil when it declines.
        try:
            S_arg = None if not np.any(S) else S
            return symmetrize(la.solve_discrete_are(A, B, Q, R, s=S_arg))
        except (la.LinAlgError, ValueError):
            pass

    # Compress away the control columns, then order the QZ so the deflating
    # subspace for eigenvalues inside the unit circle comes first.
    q, _ = la.qr(H[:, 2 * n:])
    Hc = q[:, m:].T @ H[:, :2 * n]
    Jc = q[:, m:].T @ J[:, :2 * n]
    if allow_marginal:
        def sorter(alpha, beta):
            return np.abs(alpha) <= (1.0 + 1e-9) * np.abs(beta)
    else:
        sorter = "iuc"
    _, _, alpha, beta, _, z = la.ordqz(Hc, Jc, sort=sorter, output="real")
    if allow_marginal:
        n_stable = int(np.sum(np.abs(alpha) <= (1.0 + 1e-9) * np.abs(beta)))
        if n_stable < n:
            raise NoStabilizingSolution(
                f"pencil has {n_stable} eigenvalues in the closed unit disk, "
                f"expected at least {n}"
            )
    else:
        n_stable = int(np.sum(np.abs(alpha) < np.abs(beta)))
        if n_stable != n:
            raise NoStabilizingSolution(
                f"pencil has {n_stable} eigenvalues inside the unit circle, "
                f"expected {n}"
            )
    u00 = z[:n, :n]
    u10 = z[n:, :n]
    if np.linalg.cond(u00) > 1e12:
        raise NoStabilizingSolution("stable deflating subspace is not complementary")
    P = la.solve(u00.T, u10.T).T
    return symmetrize(P)


def _riccati_pieces(A, B, Q, R, S, P):
    """Gain, innovation, closed loop and residual for a candidate P.

    Game-type innovation matrices are legitimately near-singular close to a
    feasibility boundary; the conditioning warning is silenced here because
    every caller validates the result through the residual and the
    closed-loop radius.
    """
    import warnings as _warnings

    innovation = symmetrize(R + B.T @ P @ B)
    try:
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore", la.LinAlgWarning)
            gain = la.solve(innovation, B.T @ P @ A + S.T)
    except la.LinAlgError as exc:
        raise NoStabilizingSolution(f"innovation matrix is singular: {exc}") from exc
    closed_loop = A - B @ gain
    residual = Q + A.T @ P @ A - (A.T @ P @ B + S) @ gain - P
    return gain, innovation, closed_loop, float(np.linalg.norm(residual))


def _newton_refine(A, B, Q, R, S, P, steps=2):
    """Defect-correction sweeps: solve the closed-loop Stein equation for the
    residual and add the correction.  Quadratically sharpens a pencil
    solution whose conditioning suffered on badly scaled data; corrections
    that do not reduce the residual are discarded."""
    import warnings as _warnings

    for _ in range(steps):
        gain, _, closed_loop, residual = _riccati_pieces(A, B, Q, R, S, P)
        if residual <= 1e-12 * (1.0 + np.linalg.norm(P)):
            break
        defect = Q + A.T @ P @ A - (A.T @ P @ B + S) @ gain - P
        if spectral_radius(closed_loop) >= 1.0 - 1e-12:
            break
        try:
            with _warnings.catch_warnings():
                _warnings.simplefilter("ignore", la.LinAlgWarning)
                candidate = symmetrize(
                    P + solve_stein(closed_loop, symmetrize(defect), tol=np.inf)
                )
        except (SingularEquation, UnstableF):
            break
        _, _, _, new_residual = _riccati_pieces(A, B, Q, R, S, candidate)
        if new_residual >= residual:
            break
        P = candidate
    return P


def solve_dare(A, B, Q, R, S=None, tol=1e-9, allow_marginal=False):
    """Unique stabilizing solution of the definite DARE.

    Solves P = Q + A'PA - (A'PB + S)(R + B'PB)^{-1}(B'PA + S') with
    Q Hermitian PSD and R Hermitian PD, via the invariant-subspace method.
    The optional cross term S defaults to zero.

    Returns a RiccatiSolution whose gain is (R + B'PB)^{-1}(B'PA + S') and
    whose closed loop A - B @ gain is verified strictly stable (or within
    1e-9 of the circle when ``allow_marginal`` admits semi-stabilizing
    solutions).

    Raises NoStabilizingSolution when the pencil has no n-dimensional stable
    deflating subspace, the residual exceeds tolerance, or the closed loop
    violates the stability requirement.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n):
        raise DimensionMismatch("A, B, Q dimensions are inconsistent")
    m = B.shape[1]
    if R.shape != (m, m):
        raise DimensionMismatch("R must match the column count of B")
    S = np.zeros((n, m)) if S is None else as_matrix(S, "S")
    if S.shape != (n, m):
        raise DimensionMismatch("S must have the shape of B")

    P = _dare_via_pencil(A, B, Q, R, S, allow_marginal=allow_marginal)
    if not allow_marginal:
        P = _newton_refine(A, B, Q, R, S, P)
    gain, innovation, closed_loop, residual = _riccati_pieces(A, B, Q, R, S, P)
    if residual > tol * (1.0 + np.linalg.norm(P)):
        raise NoStabilizingSolution(
            f"Riccati residual {residual:.3e} exceeds tolerance"
        )
    radius_cap = 1.0 + 1e-9 if allow_marginal else 1.0 - 1e-12
    if spectral_radius(closed_loop) >= radius_cap:
        raise NoStabilizingSolution("closed loop is not strictly stable")
    return RiccatiSolution(P, gain, innovation, closed_loop, residual)


def solve_indefinite_dare(A, B_blocks, Q, R_tilde, tol=1e-8):
    """Stabilizing solution of the indefinite (game-type) DARE.

    ``B_blocks`` is the pair (B_u, B_w); the stacked input matrix is
    Bt = [B_u  B_w] and ``R_tilde`` is the signature weight (typically
    blockdiag(I, -gamma^2 I)).  Solves

        P = Q + A'PA - A'P Bt (R_tilde + Bt'P Bt)^{-1} Bt'PA

    and reports, rather than enforces, the feasibility data: the inertias
    of R_tilde and of H = R_tilde + Bt'P Bt, the closed-loop stability
    flag, and whether P is PSD.  The caller decides feasibility.

    Raises NoStabilizingSolution only when no solution can be produced at
    all (pencil defect or residual failure).
    """
    A = as_matrix(A, "A")
    B_u = as_matrix(B_blocks[0], "B_u")
    B_w = as_matrix(B_blocks[1], "B_w")
    Q = as_matrix(Q, "Q")
    R_tilde = as_matrix(R_tilde, "R_tilde")
    n = A.shape[0]
    if B_u.shape[0] != n or B_w.shape[0] != n:
        raise DimensionMismatch("input blocks must have one row per state")
    Bt = np.hstack([B_u, B_w])
    k = Bt.shape[1]
    if R_tilde.shape != (k, k):
        raise DimensionMismatch("R_tilde must match the stacked input count")
    S = np.zeros((n, k))

    P = _dare_via_pencil(A, Bt, Q, R_tilde, S)
    P = _newton_refine(A, Bt, Q, R_tilde, S, P)
    gain, H, closed_loop, residual = _riccati_pieces(A, Bt, Q, R_tilde, S, P)
    if residual > tol * (1.0 + np.linalg.norm(P)):
        raise NoStabilizingSolution(
            f"indefinite Riccati residual {residual:.3e} exceeds tolerance"
        )
    sol = RiccatiSolution(P, gain, H, closed_loop, residual)
    r_in = inertia(R_tilde)
    h_in = inertia(H)
    stable = spectral_radius(closed_loop) < 1.0 - 1e-12
    p_eigs = np.linalg.eigvalsh(P)
    p_psd = bool(p_eigs.min() >= -1e-8 * max(1.0, p_eigs.max())) if p_eigs.size else True
    return IndefiniteDareResult(sol, r_in, h_in, tuple(r_in) == tuple(h_in), stable, p_psd)


def _stein_doubling(F, W, transpose):
    X = W.copy()
    Fk = F.copy()
    for _ in range(200):
        if transpose:
            step = Fk @ X @ Fk.T
        else:
            step = Fk.T @ X @ Fk
        X = X + step
        Fk = Fk @ Fk
        if np.linalg.norm(step) <= 1e-14 * (1.0 + np.linalg.norm(X)):
            return X
    raise SingularEquation("Stein doubling iteration failed to converge")


def solve_stein(F, W, transpose=False, tol=1e-9):
    """Solve the Stein equation X = F'XF + W (or X = FXF' + W).

    Requires spectral_radius(F) < 1; raises UnstableF otherwise.  Small
    problems go through the Kronecker linear solve, larger ones through a
    doubling iteration.  The Hermitian structure of W is inherited by X and
    enforced by symmetrization.
    """
    F = as_matrix(F, "F")
    W = as_matrix(W, "W")
    n = F.shape[0]
    if F.shape != (n, n) or W.shape != (n, n):
        raise DimensionMismatch("F and W must be square with matching size")
    if spectral_radius(F) >= 1.0:
        raise UnstableF("Stein equation requires spectral_radius(F) < 1")

    if n <= STEIN_KRON_LIMIT:
        # vec(F'XF) = kron(F.T, F.T) vec(X) in column-major convention.
        K = np.kron(F.T, F.T) if not transpose else np.kron(F, F)
        lhs = np.eye(n * n) - K
        try:
            x = la.solve(lhs, W.reshape(-1, order="F"))
        except la.LinAlgError as exc:
            raise SingularEquation(f"Stein linear system is singular: {exc}") from exc
        X = x.reshape((n, n), order="F")
    else:
        X = _stein_doubling(F, W, transpose)

    if is_hermitian(W):
        X = symmetrize(X)
    recon = F @ X @ F.T if transpose else F.T @ X @ F
    residual = float(np.linalg.norm(X - recon - W))
    if residual > tol * (1.0 + np.linalg.norm(X)):
        raise SingularEquation(f"Stein residual {residual:.3e} exceeds tolerance")
    return X


def solve_stein_sylvester(A1, A2, C, tol=1e-9):
    """Solve the two-sided Stein-Sylvester equation X = A1 X A2' + C.

    spectral_radius(A1) * spectral_radius(A2) < 1 is sufficient for a unique
    solution; the solver attempts the Kronecker linear solve regardless and
    raises SingularEquation when the system is singular or the residual is
    out of tolerance.
    """
    A1 = as_matrix(A1, "A1")
    A2 = as_matrix(A2, "A2")
    C = as_matrix(C, "C")
    n1 = A1.shape[0]
    n2 = A2.shape[0]
    if A1.shape != (n1, n1) or A2.shape != (n2, n2) or C.shape != (n1, n2):
        raise DimensionMismatch("Stein-Sylvester operands have inconsistent shapes")
    # vec(A1 X A2') = kron(A2, A1) vec(X) for real A2.
    lhs = np.eye(n1 * n2) - np.kron(A2, A1)
    try:
        x = la.solve(lhs, C.reshape(-1, order="F"))
    except la.LinAlgError as exc:
        raise SingularEquation(f"Stein-Sylvester system is singular: {exc}") from exc
    X = x.reshape((n1, n2), order="F")
    residual = float(np.linalg.norm(X - A1 @ X @ A2.T - C))
    if residual > tol * (1.0 + np.linalg.norm(X)):
        raise SingularEquation(
            f"Stein-Sylvester residual {residual:.3e} exceeds tolerance"
        )
    return X
