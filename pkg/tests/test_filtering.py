"""Estimator synthesis, oracles, and the causal-approximation solver."""
import numpy as np
import pytest

from pathregret.benchmarks import scalar_filter_plant, tracking_filter_plant
from pathregret.control import FeasibilityReport, bisect_gamma
from pathregret.errors import GammaTooSmall, NotStabilizable, UnstableF
from pathregret.filtering import (
    FilterPlant,
    filter_regret_check,
    kalman_synthesize,
    nehari_solve,
    pathlength_filter_synthesize,
    pathlength_gamma_feasible,
    smoothed_oracle,
)
from pathregret.numerics import max_singular_value, spectral_radius
from pathregret.sim import DisturbanceSpec, generate, simulate_filter
from pathregret.xfer import StateSpace, adjoint_evaluate, evaluate
from tests.conftest import impulse_from_estimator, impulse_from_transfer

TRACKING_DT = 0.01


def tracking_gamma_star():
    plant = tracking_filter_plant(TRACKING_DT)
    return bisect_gamma(lambda g: pathlength_gamma_feasible(plant, g),
                        rel_tol=1e-4)


class TestPlantValidation:
    def test_unstabilizable(self):
        with pytest.raises(NotStabilizable):
            FilterPlant([[2.0]], [[0.0]], [[1.0]], [[1.0]])


class TestKalman:
    def test_observer_convergence_noise_free(self):
        # B = 0 forces a zero stationary gain, so the estimate converges to
        # the (decaying) state geometrically.
        plant = FilterPlant(0.9 * np.eye(2), np.zeros((2, 1)), np.eye(2),
                            np.eye(2))
        kf = kalman_synthesize(plant)
        x = np.array([1.0, -2.0])
        errs = []
        for _ in range(60):
            shat = kf.step(x)
            errs.append(np.linalg.norm(shat - x))
            x = 0.9 * x
        assert errs[-1] <= errs[0] * 0.95**59

    def test_observer_corrects_faster_than_plant(self):
        # With process noise modeled, noise-free measurements drive the
        # estimation error down much faster than the slow plant mode.
        plant = FilterPlant(0.98 * np.eye(2), np.eye(2), np.eye(2), np.eye(2))
        kf = kalman_synthesize(plant)
        x = np.array([1.0, -2.0])
        err = None
        for _ in range(200):
            shat = kf.step(x)
            err = np.linalg.norm(shat - x)
            x = 0.98 * x
        assert np.linalg.norm(x) > 1e-3
        assert err < 1e-6

    def test_scalar_gain_oracle(self):
        plant = scalar_filter_plant()
        kf = kalman_synthesize(plant)
        # P2 solves B^2 + A^2 P - P - A^2 P^2 / (1 + P) = 0, stabilizing root.
        roots = np.roots([1.0, 1.0 - 1.0 - 0.25, -1.0])
        P2 = max(r.real for r in roots if abs(r.imag) < 1e-12)
        K2 = 0.5 * P2 / (1 + P2)
        assert kf.K2[0, 0] == pytest.approx(K2, abs=1e-10)

    def test_beats_naive_estimator(self, rng):
        plant = tracking_filter_plant(TRACKING_DT)
        kf = kalman_synthesize(plant)
        wins = 0
        for seed in range(20):
            srng = np.random.default_rng(seed)
            T = 2000
            w = srng.standard_normal((T, 1))
            v = srng.standard_normal((T, 1))
            res = simulate_filter(plant, kf, w, v)
            naive = float(np.sum((res.measurements - res.targets) ** 2))
            wins += res.total_error < naive
        assert wins == 20


class TestSmoothedOracle:
    def test_zero_measurements(self):
        plant = scalar_filter_plant()
        shat = smoothed_oracle(plant, np.zeros((50, 1)))
        assert np.all(shat == 0.0)

    def test_zero_excitation_channel(self, rng):
        plant = FilterPlant([[0.5]], [[0.0]], [[1.0]], [[1.0]])
        shat = smoothed_oracle(plant, rng.standard_normal((50, 1)))
        assert np.all(shat == 0.0)

    def test_matches_frequency_domain_application(self, rng):
        # Interior estimates for a compactly supported record match the
        # two-sided estimator applied in the frequency domain by FFT.
        plant = scalar_filter_plant()
        T = 4096
        y = np.zeros((T, 1))
        y[500:600, 0] = rng.standard_normal(100)
        shat = smoothed_oracle(plant, y)

        J = StateSpace(plant.A, plant.B, plant.L, [[0.0]])
        H = StateSpace(plant.A, plant.B, plant.C, [[0.0]])
        yhat = np.fft.fft(y[:, 0])
        zs = np.exp(2j * np.pi * np.arange(T) / T)
        K0 = np.empty(T, dtype=complex)
        for k, z in enumerate(zs):
            Jv = evaluate(J, z)[0, 0]
            Hv = evaluate(H, z)[0, 0]
            Ha = adjoint_evaluate(H, z)[0, 0]
            K0[k] = Jv * Ha / (1.0 + Hv * Ha)
        ref = np.real(np.fft.ifft(K0 * yhat))
        interior = slice(300, 900)
        num = np.linalg.norm(shat[interior, 0] - ref[interior])
        den = np.linalg.norm(ref[interior])
        assert num / den < 1e-3

    def test_dominates_causal_filters(self, rng):
        plant = tracking_filter_plant(TRACKING_DT)
        kf = kalman_synthesize(plant)
        T = 3000
        w = rng.standard_normal((T, 1))
        v = rng.standard_normal((T, 1))
        res = simulate_filter(plant, kf, w, v)
        shat0 = smoothed_oracle(plant, res.measurements)
        oracle_err = float(np.sum((shat0 - res.targets) ** 2))
        assert oracle_err <= res.total_error


class TestNehari:
    def test_zero_anticausal_part(self):
        nd = nehari_solve([[0.5]], [[1.0]], [[0.0]], 1.0)
        assert nd.gamma_star == 0.0
        for th in np.linspace(0, 2 * np.pi, 16, endpoint=False):
            assert np.allclose(evaluate(nd.K_hat, np.exp(1j * th)), 0.0)

    def test_scalar_closed_form(self):
        nd = nehari_solve([[0.5]], [[1.0]], [[1.0]], 2.0)
        assert nd.Z[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert nd.Pi[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert nd.gamma_star == pytest.approx(16.0 / 9.0, abs=1e-9)

    def test_gamma_too_small(self):
        with pytest.raises(GammaTooSmall):
            nehari_solve([[0.5]], [[1.0]], [[1.0]], 1.0)

    def test_unstable_f(self):
        with pytest.raises(UnstableF):
            nehari_solve([[1.1]], [[1.0]], [[1.0]], 10.0)

    def test_sup_bound_on_frequency_sweep(self):
        gstar = 16.0 / 9.0
        for factor in (1.01, 1.5, 4.0):
            gamma = factor * gstar
            nd = nehari_solve([[0.5]], [[1.0]], [[1.0]], gamma)
            worst = 0.0
            for th in np.linspace(0, 2 * np.pi, 256, endpoint=False):
                z = np.exp(1j * th)
                gap = evaluate(nd.K_hat, z) - nd.T.evaluate(z)
                worst = max(worst, max_singular_value_c(gap))
            assert worst <= gamma * (1 + 1e-6)

    def test_matrix_case_bound(self, rng):
        from tests.conftest import random_stable_matrix

        F = random_stable_matrix(rng, 3, radius=0.8)
        G = rng.standard_normal((3, 2))
        Hm = rng.standard_normal((2, 3))
        probe = nehari_solve(F, G, Hm, 1e12)
        for factor in (1.01, 2.0):
            gamma = factor * max(probe.gamma_star, 1e-12)
            nd = nehari_solve(F, G, Hm, gamma)
            worst = 0.0
            for th in np.linspace(0, 2 * np.pi, 256, endpoint=False):
                z = np.exp(1j * th)
                gap = evaluate(nd.K_hat, z) - nd.T.evaluate(z)
                worst = max(worst, max_singular_value_c(gap))
            assert worst <= gamma * (1 + 1e-6)


def max_singular_value_c(M):
    return float(np.linalg.norm(M, 2))


class TestPathlengthFilter:
    def test_tracking_gamma_star_matches_reported_value(self):
        assert tracking_gamma_star() == pytest.approx(35.64, rel=0.01)

    def test_monotone_feasibility_margin(self):
        plant = tracking_filter_plant(TRACKING_DT)
        from pathregret.factor import decompose_q, factor_center, factor_io
        from pathregret.numerics import solve_stein

        def sigma(gamma):
            io = factor_io(plant.A, plant.B, plant.C)
            center = factor_center(io, plant.L, gamma)
            qd = decompose_q(io, center)
            n = plant.n_states
            F = io.A2.T
            G = plant.C.T @ qd.Sigma2_invsqrt
            Hn = qd.L_hat @ qd.W2 @ io.A2.T @ np.linalg.inv(np.eye(n) - io.A2.T)
            Z = solve_stein(F, Hn.T @ Hn)
            Pi = solve_stein(F, G @ G.T, transpose=True)
            return max_singular_value(Z @ Pi)

        grid = np.geomspace(5.0, 500.0, 20)
        values = [sigma(g) for g in grid]
        assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))

    def test_infeasible_below_gamma_star(self):
        plant = tracking_filter_plant(TRACKING_DT)
        rep = pathlength_filter_synthesize(plant, 0.9 * tracking_gamma_star())
        assert isinstance(rep, FeasibilityReport)
        assert rep.failed == "nehari"
        assert rep.diagnostics["sigma_max_ZPi"] > 1.0

    def test_zero_input_zero_output(self):
        plant = tracking_filter_plant(TRACKING_DT)
        flt = pathlength_filter_synthesize(plant, 1.05 * tracking_gamma_star())
        res = simulate_filter(plant, flt, np.zeros((500, 1)), np.zeros((500, 1)))
        assert res.total_error == 0.0

    def test_recursion_matrices_stable(self):
        plant = tracking_filter_plant(TRACKING_DT)
        flt = pathlength_filter_synthesize(plant, 1.05 * tracking_gamma_star())
        d = flt.diagnostics
        assert d["radius_A2"] < 1
        assert d["radius_F_gamma"] < 1
        assert d["radius_pi_loop"] < 1

    @pytest.mark.parametrize("make_plant,gamma", [
        (scalar_filter_plant, 2.0),
        (tracking_filter_plant, 37.4),
    ])
    def test_impulse_matches_transfer(self, make_plant, gamma):
        plant = make_plant()
        flt = pathlength_filter_synthesize(plant, gamma)
        taps = 256
        h_rec = impulse_from_estimator(flt, plant.n_measurements, taps)
        h_fft = impulse_from_transfer(flt.transfer(), taps)
        assert np.max(np.abs(h_rec - h_fft)) < 1e-6

    def test_regret_bound_four_regimes(self, rng):
        plant = tracking_filter_plant(TRACKING_DT)
        gamma = 1.05 * tracking_gamma_star()
        flt = pathlength_filter_synthesize(plant, gamma)
        T = 5000
        w = rng.standard_normal((T, 1))
        regimes = {
            "constant": np.ones((T, 1)),
            "sine-200pi": generate(DisturbanceSpec(
                "sinusoid", period=200 * np.pi, dt=TRACKING_DT), T),
            "sine-20pi": generate(DisturbanceSpec(
                "sinusoid", period=20 * np.pi, dt=TRACKING_DT), T),
            "sine-2pi": generate(DisturbanceSpec(
                "sinusoid", period=2 * np.pi, dt=TRACKING_DT), T),
        }
        for name, v in regimes.items():
            v = v.copy()
            v[int(0.9 * T):] = 0.0
            regret, bound = filter_regret_check(plant, flt, w, v, gamma)
            assert regret <= bound * 1.01, name

    def test_zero_bound_case(self):
        # w = 0 with constant v: both bound contributions vanish apart from
        # the finite-record edges; the regret must stay within that edge
        # budget and the per-step regret must die out.
        plant = tracking_filter_plant(TRACKING_DT)
        gamma = 1.05 * tracking_gamma_star()
        flt = pathlength_filter_synthesize(plant, gamma)
        T = 8000
        v = np.ones((T, 1))
        regret, bound = filter_regret_check(plant, flt, np.zeros((T, 1)), v,
                                            gamma)
        assert bound == pytest.approx(gamma**2 * 1.0)
        assert regret <= bound * 1.01

    def test_rapid_oscillation_bound_still_holds(self, rng):
        plant = tracking_filter_plant(TRACKING_DT)
        gamma = 1.05 * tracking_gamma_star()
        flt = pathlength_filter_synthesize(plant, gamma)
        T = 4000
        w = rng.standard_normal((T, 1))
        v = generate(DisturbanceSpec("sinusoid", period=2 * np.pi,
                                     dt=TRACKING_DT), T)
        regret, bound = filter_regret_check(plant, flt, w, v, gamma)
        assert bound > 1e5
        assert regret <= bound * 1.01
