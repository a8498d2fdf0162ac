"""Spectral-factorization tests: every defining identity checked pointwise."""
import numpy as np
import pytest

from pathregret.benchmarks import (
    scalar_control_plant,
    tracking_control_plant,
    tracking_filter_plant,
)
from pathregret.control import ControlPlant
from pathregret.factor import decompose_q, factor_center, factor_control, factor_io
from pathregret.numerics import spectral_radius
from pathregret.xfer import (
    StateSpace,
    adjoint_evaluate,
    evaluate,
    invert,
    unit_circle_grid,
)
from tests.conftest import (
    center_identity_residual,
    control_identity_residual,
    io_identity_residual,
    q_split_residual,
    random_stable_matrix,
)

TRACKING = dict(A=[[1.0, 0.01], [0.0, 1.0]], B=[[0.0], [0.01]],
                C=[[1.0, 0.0]], L=np.array([[1.0, 0.0]]))


def scalar_p1_oracle():
    """Stabilizing root of the scalar whitening Riccati for A=.5, B=C=1.

    B^2 P^2 + (1 - Q B^2 - A^2) P - Q = 0 with Q = C^2 = 1.
    """
    roots = np.roots([1.0, 1.0 - 1.0 - 0.25, -1.0])
    good = [p.real for p in roots
            if abs(p.imag) < 1e-12 and abs(0.5 / (1 + p.real)) < 1]
    assert len(good) == 1
    return good[0]


class TestFactorIo:
    def test_zero_output_map_gives_identity_factor(self):
        io = factor_io([[0.5]], [[1.0]], [[0.0]])
        assert np.allclose(io.P1, 0.0)
        assert np.allclose(io.K1, 0.0)
        assert np.allclose(io.Sigma1, 1.0)
        for z in unit_circle_grid(16):
            assert np.allclose(evaluate(io.delta1, z), 1.0)

    def test_scalar_riccati_root_and_identity(self):
        io = factor_io([[0.5]], [[1.0]], [[1.0]])
        assert io.P1[0, 0] == pytest.approx(scalar_p1_oracle(), abs=1e-10)
        zs = unit_circle_grid(64, avoid=[io.delta1, io.delta2])
        assert io_identity_residual(io, zs) < 1e-8

    def test_tracking_plant_identity(self):
        io = factor_io(TRACKING["A"], TRACKING["B"], TRACKING["C"])
        zs = unit_circle_grid(64, avoid=[io.delta1, io.delta2])
        assert io_identity_residual(io, zs) < 1e-8
        assert spectral_radius(io.A1) < 1
        assert spectral_radius(io.A2) < 1


class TestFactorCenter:
    def test_zero_target_map(self):
        io = factor_io([[0.5]], [[1.0]], [[1.0]])
        center = factor_center(io, [[0.0]], 2.0)
        for z in unit_circle_grid(16, avoid=[center.delta3]):
            assert np.allclose(evaluate(center.delta3, z), 0.5)

    def test_scalar_identity_gamma_one(self):
        io = factor_io([[0.5]], [[1.0]], [[1.0]])
        center = factor_center(io, [[1.0]], 1.0)
        zs = unit_circle_grid(64, avoid=[io.delta1, center.delta3])
        assert center_identity_residual(io, center, [[1.0]], zs) < 1e-8

    def test_tracking_identity_at_paper_level(self):
        io = factor_io(TRACKING["A"], TRACKING["B"], TRACKING["C"])
        center = factor_center(io, TRACKING["L"], 35.64)
        zs = unit_circle_grid(64, avoid=[io.delta1, center.delta3])
        assert center_identity_residual(io, center, TRACKING["L"], zs) < 1e-8
        resid = (center.W1 - io.A1 @ center.W1 @ io.A1.T
                 - io.B @ np.linalg.inv(io.Sigma1) @ io.B.T / 35.64**2)
        assert np.linalg.norm(resid) < 1e-9


class TestDecomposeQ:
    def test_zero_disturbance_input(self):
        io = factor_io([[0.5]], [[0.0]], [[1.0]])
        center = factor_center(io, [[1.0]], 1.0)
        qd = decompose_q(io, center)
        assert np.allclose(qd.constant_term, 0.0)
        assert np.allclose(qd.W2, 0.0)
        for z in unit_circle_grid(8):
            assert np.allclose(evaluate(qd.causal_part, z), 0.0)
            assert np.allclose(qd.anticausal_part.evaluate(z), 0.0)

    def test_scalar_split_matches_product(self):
        io = factor_io([[0.5]], [[1.0]], [[1.0]])
        center = factor_center(io, [[1.0]], 1.0)
        qd = decompose_q(io, center)
        zs = unit_circle_grid(64, avoid=[io.delta2, center.delta3,
                                         qd.causal_part, qd.anticausal_part])
        assert q_split_residual(io, center, qd, [[1.0]], zs) < 1e-8

    def test_scalar_anchor_matches_direct_evaluation(self):
        io = factor_io([[0.5]], [[1.0]], [[1.0]])
        center = factor_center(io, [[1.0]], 1.0)
        qd = decompose_q(io, center)
        J = StateSpace(io.A, io.B, [[1.0]], [[0.0]])
        H = StateSpace(io.A, io.B, io.C, [[0.0]])
        direct = (evaluate(center.delta3, 1.0) @ evaluate(J, 1.0)
                  @ adjoint_evaluate(H, 1.0)
                  @ adjoint_evaluate(invert(io.delta2), 1.0))
        assert qd.delta3q_at_1 is not None
        assert np.max(np.abs(qd.delta3q_at_1 - np.real(direct))) < 1e-10
        # The anchor used by the estimator equals constant + anticausal at 1.
        expect = qd.constant_term + np.real(qd.anticausal_part.evaluate(1.0))
        assert np.allclose(qd.dc_anchor, expect, atol=1e-12)

    def test_tracking_product_has_pole_at_one(self):
        # With unit-circle plant modes the full product diverges at z = 1,
        # so only the stable-part anchor is available.
        io = factor_io(TRACKING["A"], TRACKING["B"], TRACKING["C"])
        center = factor_center(io, TRACKING["L"], 35.64)
        qd = decompose_q(io, center)
        assert qd.delta3q_at_1 is None
        assert np.all(np.isfinite(qd.dc_anchor))
        zs = unit_circle_grid(64, avoid=[io.delta2, center.delta3,
                                         qd.causal_part, qd.anticausal_part])
        assert q_split_residual(io, center, qd, TRACKING["L"], zs) < 1e-8

    def test_anchor_real_for_real_plant(self, rng):
        A = random_stable_matrix(rng, 3, radius=0.8)
        B = rng.standard_normal((3, 2))
        C = rng.standard_normal((2, 3))
        L = rng.standard_normal((1, 3))
        io = factor_io(A, B, C)
        center = factor_center(io, L, 1.5)
        qd = decompose_q(io, center)
        assert np.max(np.abs(np.imag(qd.delta3q_at_1))) < 1e-12


class TestFactorControl:
    def test_zero_disturbance_map_reduces_to_difference_weight(self):
        plant = ControlPlant([[0.5]], [[1.0]], [[0.0]], [[1.0]], [[1.0]])
        for gamma in (1.0, 2.0):
            cf = factor_control(plant, gamma)
            worst = 0.0
            for z in unit_circle_grid(64):
                lhs = adjoint_evaluate(cf.delta, z) @ evaluate(cf.delta, z)
                rhs = gamma**2 * (1 - 1 / z) * (1 - z)
                worst = max(worst, abs(lhs[0, 0] - rhs))
            assert worst < 1e-8

    def test_scalar_identity(self):
        plant = scalar_control_plant()
        cf = factor_control(plant, 2.0)
        zs = unit_circle_grid(64, avoid=[cf.delta, cf.delta_inverse])
        assert control_identity_residual(plant, cf, zs) < 1e-8
        assert spectral_radius(cf.delta_inverse.A) < 1

    def test_inverse_property(self):
        plant = scalar_control_plant()
        cf = factor_control(plant, 2.0)
        worst = 0.0
        for z in unit_circle_grid(64, avoid=[cf.delta, cf.delta_inverse]):
            prod = evaluate(cf.delta_inverse, z) @ evaluate(cf.delta, z)
            worst = max(worst, np.max(np.abs(prod - np.eye(prod.shape[0]))))
        assert worst < 1e-10

    def test_tracking_style_identity(self):
        plant = tracking_control_plant()
        cf = factor_control(plant, 50.0)
        F = StateSpace(plant.A, plant.B_u, plant.L, np.zeros((2, 1)))
        zs = unit_circle_grid(64, avoid=[cf.delta, cf.delta_inverse, F])
        assert control_identity_residual(plant, cf, zs) < 1e-8


class TestRandomPlants:
    def test_all_identities_on_random_stable_plants(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 3))
            p = int(rng.integers(1, 3))
            r = int(rng.integers(1, 3))
            A = random_stable_matrix(rng, n, radius=0.85)
            B = rng.standard_normal((n, m))
            C = rng.standard_normal((p, n))
            L = rng.standard_normal((r, n))
            io = factor_io(A, B, C)
            center = factor_center(io, L, 1.5)
            qd = decompose_q(io, center)
            zs = unit_circle_grid(64, avoid=[io.delta1, io.delta2,
                                             center.delta3, qd.causal_part,
                                             qd.anticausal_part])
            assert io_identity_residual(io, zs) < 1e-8
            assert center_identity_residual(io, center, L, zs) < 1e-8
            assert q_split_residual(io, center, qd, L, zs) < 1e-8
