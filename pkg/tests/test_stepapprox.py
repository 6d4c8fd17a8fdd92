import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convfield.stepapprox import (build_step_approx, chebyshev_series_coeffs,
                                  eval_poly, eval_poly_derivative)


def step(x):
    return 1.0 if x > 0 else (0.5 if x == 0 else 0.0)


class TestCoefficients:
    def test_constant_term_exact_half(self):
        for d in (1, 3, 7, 15, 31, 63):
            assert build_step_approx(d).mono_coeffs[0] == 0.5

    def test_even_coefficients_vanish(self):
        for d in (3, 7, 15, 31):
            c = build_step_approx(d).mono_coeffs
            assert np.max(np.abs(c[2::2])) < 1e-12

    def test_degree_bounds_enforced(self):
        with pytest.raises(ValueError):
            build_step_approx(0)
        with pytest.raises(ValueError):
            build_step_approx(64)

    def test_deterministic(self):
        a, b = build_step_approx(15), build_step_approx(15)
        assert np.array_equal(a.mono_coeffs, b.mono_coeffs)
        assert np.array_equal(a.pair_coeffs, b.pair_coeffs)

    def test_quadrature_node_count_converged(self):
        # the projection target is analytic, so aliasing is below double
        # precision at the default node count
        for d in (7, 15, 31):
            a = chebyshev_series_coeffs(d, nodes=4096)
            b = chebyshev_series_coeffs(d, nodes=16384)
            assert np.max(np.abs(a - b)) < 1e-13

    def test_parity_shortcut_matches_full_quadrature(self):
        # oracle: same projection without exploiting the odd symmetry
        nodes = 4096
        theta = (2 * np.arange(1, nodes + 1) - 1) * np.pi / (2 * nodes)
        x = np.cos(theta)
        target = 0.5 * (1.0 + np.tanh(x / 0.08))
        full = np.array([(2.0 / nodes) * np.sum(target * np.cos(k * theta))
                         for k in range(16)])
        full[0] *= 0.5
        mine = chebyshev_series_coeffs(15, nodes=nodes)
        assert np.max(np.abs(full - mine)) < 1e-13


class TestApproximationQuality:
    def test_grid_error_d15(self):
        a = build_step_approx(15)
        errs = [abs(eval_poly(a, x) - step(x))
                for x in (0.2, 0.4, 0.6, 0.8, -0.2, -0.4, -0.6, -0.8)]
        assert max(errs) < 0.08

    def test_value_at_08_near_one(self):
        a = build_step_approx(15)
        assert abs(eval_poly(a, 0.8) - 1.0) < 0.08

    def test_l2_error_decreases_with_degree(self):
        grid = np.linspace(-1.0, 1.0, 2001)
        target = np.array([step(x) for x in grid])
        l2 = []
        for d in (3, 7, 15, 31):
            a = build_step_approx(d)
            vals = np.array([eval_poly(a, float(x)) for x in grid])
            l2.append(np.sqrt(np.mean((vals - target) ** 2)))
        assert all(hi > lo for hi, lo in zip(l2, l2[1:]))

    def test_range_bounded_on_interior(self):
        for d in (3, 7, 15, 31):
            a = build_step_approx(d)
            vals = [eval_poly(a, float(x)) for x in np.arange(-0.9, 0.9001, 0.01)]
            assert min(vals) >= -0.2 and max(vals) <= 1.2

    def test_rising_trend_with_bounded_ripple_d15(self):
        # degree-15 polynomials cannot be both sampled-monotone and sharp
        # enough for the 0.08 grid bound; assert bounded ripple plus a
        # dominating overall rise instead
        a = build_step_approx(15)
        xs = np.arange(-0.95, 0.9501, 0.01)
        vals = np.array([eval_poly(a, float(x)) for x in xs])
        diffs = np.diff(vals)
        assert diffs.min() > -0.01
        assert vals[-1] - vals[0] > 0.95


class TestEvaluation:
    def test_value_at_zero_is_half(self):
        for d in (1, 7, 15):
            assert eval_poly(build_step_approx(d), 0.0) == 0.5

    def test_odd_symmetry_about_half(self):
        a = build_step_approx(15)
        for x in np.linspace(-1.0, 1.0, 41):
            assert abs(eval_poly(a, float(x)) + eval_poly(a, float(-x)) - 1.0) < 1e-9

    def test_domain_rejected(self):
        a = build_step_approx(7)
        with pytest.raises(ValueError):
            eval_poly(a, 1.0001)
        with pytest.raises(ValueError):
            eval_poly_derivative(a, -1.1)

    def test_derivative_at_zero_is_linear_coeff(self):
        a = build_step_approx(15)
        assert eval_poly_derivative(a, 0.0) == a.mono_coeffs[1]

    def test_derivative_matches_finite_difference(self):
        a = build_step_approx(15)
        h = 1e-6
        num = (eval_poly(a, 0.3 + h) - eval_poly(a, 0.3 - h)) / (2 * h)
        assert abs(eval_poly_derivative(a, 0.3) - num) < 1e-7

    def test_derivative_even(self):
        a = build_step_approx(15)
        for x in np.linspace(0.0, 1.0, 21):
            assert abs(eval_poly_derivative(a, float(x))
                       - eval_poly_derivative(a, float(-x))) < 1e-9


class TestPairCoefficients:
    def test_binomial_identity_random_points(self):
        rng = np.random.default_rng(7)
        for d in (3, 7, 15):
            a = build_step_approx(d)
            for _ in range(200):
                x, y = rng.uniform(0.0, 1.0, size=2)
                for mu in range(d + 1):
                    lows = np.arange(mu + 1)
                    lhs = float(a.pair_coeffs[mu, lows] @ (x ** lows * y ** (mu - lows)))
                    rhs = a.mono_coeffs[mu] * (x - y) ** mu
                    assert abs(lhs - rhs) < 1e-9

    @given(x=st.floats(0.0, 1.0), y=st.floats(0.0, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_binomial_identity_property_d7(self, x, y):
        a = build_step_approx(7)
        for mu in range(8):
            lows = np.arange(mu + 1)
            lhs = float(a.pair_coeffs[mu, lows] @ (x ** lows * y ** (mu - lows)))
            rhs = a.mono_coeffs[mu] * (x - y) ** mu
            assert abs(lhs - rhs) < 1e-9
