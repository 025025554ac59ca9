import math
import warnings

import numpy as np
import pytest

from qfields import kernel, measure, qpoly
from qfields.kernel import (GaussianAR1, PositivityError,
                            ScaledTwoPointChain, TwoPointChain,
                            chapman_kolmogorov_residual,
                            conditional_moment_residual,
                            detailed_balance_residual, eigen_residual,
                            mehler_kernel, stationarity_residual,
                            stationary_spec, transition_density,
                            two_point_matrix)
from qfields.measure import QGaussian, RadialLaw, ScaledTwoPoint, StdGaussian, TwoPointSym
from qfields.params import FieldParams, params_from_rho_q

GAUSS_POINT = FieldParams(0.5, 0.16, 0.32, 0.6, 0.0)


class TestConstruction:
    def test_rho_validated(self):
        with pytest.raises(ValueError):
            mehler_kernel(0.0, 0.5)
        with pytest.raises(ValueError):
            mehler_kernel(1.0, 0.5)

    def test_q_endpoint_routed_to_ar1(self):
        with pytest.raises(ValueError):
            mehler_kernel(0.5, 1.0)

    def test_warn_near_one(self):
        with pytest.warns(UserWarning):
            mehler_kernel(0.5, 0.996)

    def test_truncation_grows_with_rho(self):
        n_lo = mehler_kernel(0.3, 0.0).truncation
        n_hi = mehler_kernel(0.8, 0.0).truncation
        assert n_lo < n_hi <= qpoly.MAX_DEGREE

    def test_forced_truncation(self):
        k = mehler_kernel(0.5, 0.0, truncation=20)
        assert k.truncation == 20
        with pytest.raises(ValueError):
            mehler_kernel(0.5, 0.0, truncation=qpoly.MAX_DEGREE + 1)


class TestTransitionDensity:
    def test_ar1_closed_form(self):
        k = GaussianAR1(0.6)
        assert transition_density(k, 0.6, 1.0) == pytest.approx(
            1.0 / math.sqrt(2.0 * math.pi * 0.64), abs=1e-15)

    def test_ar1_normalizes(self):
        from qfields.quadrature import integrate_gaussian
        k = GaussianAR1(0.6)
        sd = math.sqrt(1.0 - 0.36)
        val = integrate_gaussian(lambda x: np.ones_like(x), mean=0.6 * 1.2, sd=sd)
        assert val == pytest.approx(1.0, abs=1e-14)

    def test_mehler_normalizes(self):
        from qfields.quadrature import integrate_adaptive
        k = mehler_kernel(0.5, 0.0)
        s = QGaussian(0.0)
        for y in (-1.5, 0.0, 1.5):
            val, _ = integrate_adaptive(
                lambda th: measure.theta_weight(s, th)
                * kernel.mehler_sum(k, measure.theta_to_x(s, th), np.array([y]))[:, 0],
                0.0, math.pi, tol=1e-12)
            assert val == pytest.approx(1.0, abs=1e-8)

    def test_independence_limit(self):
        k = mehler_kernel(1e-6, 0.3)
        s = QGaussian(0.3)
        xs = np.linspace(-1.8, 1.8, 21)
        for y in (-1.0, 0.7):
            assert np.allclose(transition_density(k, xs, y),
                               measure.density(s, xs), atol=1e-5)

    def test_atomic_rejected(self):
        with pytest.raises(ValueError):
            transition_density(TwoPointChain(0.5), 1.0, 1.0)

    def test_clamp_recorded_at_hard_corner(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            k = mehler_kernel(0.8, 0.9)
        s = 2.0 / math.sqrt(0.1)
        xs = np.linspace(-s, s, 801)
        f = transition_density(k, xs, 0.95 * s)
        assert np.all(f >= 0.0)
        assert k.clamp_stats.worst >= 0.0  # wobble magnitude is recorded

    def test_positivity_guard(self, monkeypatch):
        k = mehler_kernel(0.5, 0.0)
        monkeypatch.setattr(
            kernel, "_mehler_sum_and_last",
            lambda kk, x, y: (np.full((np.atleast_1d(x).size, 1), -1.0),
                              np.zeros((np.atleast_1d(x).size, 1))))
        with pytest.raises(PositivityError):
            transition_density(k, 0.3, 0.1)


class TestEigenResidual:
    def test_degree_zero_exact(self):
        assert eigen_residual(mehler_kernel(0.5, 0.5), 0, 0.7) <= 1e-12

    def test_ar1_linear(self):
        assert eigen_residual(GaussianAR1(0.6), 1, 2.0) <= 1e-13

    def test_mehler_degree_five(self):
        assert eigen_residual(mehler_kernel(0.5, 0.5), 5, 1.0) <= 1e-6

    @pytest.mark.parametrize("rho", [0.3, 0.8])
    @pytest.mark.parametrize("q", [-0.5, 0.9])
    def test_ladder(self, rho, q):
        k = mehler_kernel(rho, q)
        s = 2.0 / math.sqrt(1.0 - q)
        for n in range(0, 9):
            for y in (-0.8 * s, 0.0, 0.6 * s):
                assert eigen_residual(k, n, y) <= 1e-6

    def test_two_point(self):
        k = TwoPointChain(0.5)
        for n in range(0, 5):
            assert eigen_residual(k, n, 1.0) <= 1e-14
            assert eigen_residual(k, n, -1.0) <= 1e-14

    def test_degree_cap(self):
        with pytest.raises(ValueError):
            eigen_residual(GaussianAR1(0.5), 13, 0.0)


class TestConditionalMoments:
    def test_ar1_exact(self):
        k = GaussianAR1(0.5)
        for y in (-2.0, 0.0, 1.3):
            r = conditional_moment_residual(k, GAUSS_POINT, y)
            assert r["r_mean"] <= 1e-12
            assert r["r_var"] <= 1e-12

    def test_two_point(self):
        rho = 0.5
        A = rho * rho / (1.0 + rho ** 4)
        p = FieldParams(rho, A, 0.0, 1.0 - 2.0 * A, 0.0)
        k = TwoPointChain(rho)
        for y in (-1.0, 1.0):
            r = conditional_moment_residual(k, p, y)
            assert r["r_mean"] <= 1e-14
            assert r["r_var"] <= 1e-14

    def test_scaled_two_point(self):
        radial = RadialLaw(values=(math.sqrt(2.0), 0.0), probs=(0.5, 0.5))
        p = FieldParams(0.5, 0.5, 0.0, 0.0, 0.0)
        k = ScaledTwoPointChain(0.5, radial)
        for y in (-math.sqrt(2.0), 0.0, math.sqrt(2.0)):
            r = conditional_moment_residual(k, p, y)
            assert r["r_mean"] <= 1e-14
            assert r["r_var"] <= 1e-14

    def test_mehler(self):
        k = mehler_kernel(0.7, 0.5)
        p = params_from_rho_q(0.7, 0.5)
        s = 2.0 / math.sqrt(0.5)
        for y in (-0.7 * s, 0.2 * s):
            r = conditional_moment_residual(k, p, y)
            assert r["r_mean"] <= 1e-8
            assert r["r_var"] <= 1e-8


class TestStationarity:
    def test_two_point_exact(self):
        assert stationarity_residual(TwoPointChain(0.5), TwoPointSym(), 1.0) == 0.0

    def test_scaled_exact(self):
        radial = RadialLaw(values=(math.sqrt(2.0), 0.0), probs=(0.5, 0.5))
        k = ScaledTwoPointChain(0.5, radial)
        assert stationarity_residual(k, ScaledTwoPoint(radial), 0.0) <= 1e-15

    def test_ar1(self):
        assert stationarity_residual(GaussianAR1(0.6), StdGaussian(), 0.7) <= 1e-9

    def test_mehler(self):
        k = mehler_kernel(0.5, 0.0)
        assert stationarity_residual(k, QGaussian(0.0), 0.7) <= 1e-6

    def test_pair_mismatch(self):
        with pytest.raises(ValueError):
            stationarity_residual(mehler_kernel(0.5, 0.0), QGaussian(0.5), 0.0)

    def test_stationary_spec_pairing(self):
        assert stationary_spec(GaussianAR1(0.4)) == StdGaussian()
        assert stationary_spec(TwoPointChain(0.4)) == TwoPointSym()
        assert stationary_spec(mehler_kernel(0.5, 0.25)) == QGaussian(0.25)


class TestTwoPointMatrix:
    def test_hand_values(self):
        m = two_point_matrix(0.5)
        assert m[0, 0] == pytest.approx(0.75)
        assert m[0, 1] == pytest.approx(0.25)

    def test_independence(self):
        assert np.allclose(two_point_matrix(0.0), 0.5)

    def test_antithetic(self):
        assert two_point_matrix(-0.5)[0, 0] == pytest.approx(0.25)

    @pytest.mark.parametrize("rho", [-0.9, -0.3, 0.0, 0.4, 0.99])
    def test_stochastic(self, rho):
        m = two_point_matrix(rho)
        assert np.allclose(m.sum(axis=1), 1.0)
        assert np.all(m >= 0.0)


class TestComposition:
    def test_ar1_chapman_kolmogorov(self):
        k = GaussianAR1(0.6)
        for x, z in ((0.5, -0.3), (1.2, 0.8)):
            assert chapman_kolmogorov_residual(k, x, z) <= 1e-12

    @pytest.mark.parametrize("rho,q", [(0.5, 0.0), (0.8, 0.9), (0.3, -0.5)])
    def test_mehler_chapman_kolmogorov(self, rho, q):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            k = mehler_kernel(rho, q)
        s = 2.0 / math.sqrt(1.0 - q)
        for x, z in ((0.3 * s, -0.5 * s), (-0.1 * s, 0.6 * s)):
            assert chapman_kolmogorov_residual(k, x, z) <= 1e-6

    def test_detailed_balance(self):
        k = mehler_kernel(0.6, 0.3)
        s = QGaussian(0.3)
        for x, y in ((0.5, -1.1), (1.4, 0.2)):
            assert detailed_balance_residual(k, s, x, y) <= 1e-8
        kg = GaussianAR1(0.6)
        assert detailed_balance_residual(kg, StdGaussian(), 0.5, -1.1) <= 1e-15
