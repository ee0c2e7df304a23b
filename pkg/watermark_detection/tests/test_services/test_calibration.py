"""Tests for thresholds and error exponents."""

import itertools
import math

import pytest
from pydantic import ValidationError

from watermark_detection.app.schemas.calibration import CalibrationRequest
from watermark_detection.app.services.calibration_service import (
    calibrate,
    chernoff_threshold,
    exponent_complete,
    exponent_sum,
    fixed_alpha_threshold,
    least_favorable_density,
    moments_h0,
    rg_exact_errors,
    rg_fixed_alpha_threshold,
    rg_sum_threshold,
    rg_type2_theory,
    sum_objective,
    sum_threshold,
    sum_threshold_gumbel_complete,
    sum_threshold_gumbel_partial,
)
from watermark_detection.exceptions import ParameterError
from watermark_detection.numerics.integrate import integrate_unit
from watermark_detection.numerics.optimize import grid_minimize
from watermark_detection.watermark.statistics import ScoreFunction

# Stationary point of integral (2r)^a dr at delta = 1/2
ALPHA_STAR_HALF = 1 / math.log(2) - 1


class TestMomentsH0:
    def test_log_score(self):
        mean, var = moments_h0(ScoreFunction.log())
        assert mean == pytest.approx(-1.0, abs=1e-8)
        assert var == pytest.approx(1.0, abs=1e-7)

    def test_ars_score(self):
        mean, var = moments_h0(ScoreFunction.ars())
        assert mean == pytest.approx(1.0, abs=1e-8)
        assert var == pytest.approx(1.0, abs=1e-7)

    def test_optimal_score_at_half(self):
        """E0[log 2Y] = log 2 - 1."""
        mean, _ = moments_h0(ScoreFunction.opt_complete(0.5))
        assert mean == pytest.approx(-0.30685, abs=1e-5)


class TestFixedAlphaThreshold:
    def test_log_score(self):
        spec = fixed_alpha_threshold(ScoreFunction.log(), 100, 0.05)
        assert spec.gamma_n == pytest.approx(-83.5515, abs=1e-3)
        assert spec.regime == "fixed_alpha"
        assert spec.score == "log"

    def test_ars_score(self):
        spec = fixed_alpha_threshold(ScoreFunction.ars(), 400, 0.05)
        assert spec.gamma_n == pytest.approx(432.897, abs=1e-3)

    def test_grows_with_n(self):
        h = ScoreFunction.opt_complete(0.3)
        short = fixed_alpha_threshold(h, 100, 0.05)
        assert fixed_alpha_threshold(h, 200, 0.05).gamma_n > short.gamma_n

    def test_alpha_out_of_range(self):
        with pytest.raises(ParameterError):
            fixed_alpha_threshold(ScoreFunction.log(), 10, 1.0)


class TestGumbelSumThreshold:
    def test_complete_delta_half(self):
        """alpha* = 1/ln 2 - 1 and the objective is e ln 2 / 2."""
        solved = sum_threshold_gumbel_complete(0.5)
        assert solved.optimum == pytest.approx(ALPHA_STAR_HALF, abs=1e-5)
        assert solved.objective == pytest.approx(math.e * math.log(2) / 2, abs=1e-8)
        expected = math.log(ALPHA_STAR_HALF / (1 - ALPHA_STAR_HALF))
        assert solved.gamma_n == pytest.approx(expected, abs=1e-4)

    def test_partial_theta_one_matches_complete(self):
        for delta in (0.5, 0.6, 0.7):
            complete = sum_threshold_gumbel_complete(delta)
            partial = sum_threshold_gumbel_partial(delta, 1.0)
            assert partial.optimum == pytest.approx(complete.optimum, abs=1e-8)

    def test_near_half_theta_is_flat(self):
        """theta -> 1/2 makes the least-favorable density uniform."""
        solved = sum_threshold_gumbel_partial(0.3, 0.5 + 1e-12)
        assert solved.result.flat
        assert solved.optimum == 0.5

    def test_threshold_spec_labels(self):
        h = ScoreFunction.opt_partial(0.005, 0.8)
        spec = sum_threshold(h, 100, 0.005, 0.8)
        assert spec.optimum_label == "beta_star"
        assert spec.mode == "partial"
        assert "objective" in spec.diagnostics

    def test_small_delta_partial_golden_value(self):
        """delta = 0.005, theta = 0.8 minimizer, frozen from a dense Simpson root of I'(beta).

        The objective's curvature at the optimum is about 7.8e-4, so double
        precision pins beta* to roughly 1e-6; the tolerance leaves room for that.
        """
        solved = sum_threshold_gumbel_partial(0.005, 0.8)
        assert not solved.result.flat
        assert solved.optimum == pytest.approx(0.5132228729, abs=1e-5)
        assert solved.gamma_n == pytest.approx(0.0529038271, abs=5e-5)
        assert solved.objective == pytest.approx(0.999902696528, abs=1e-9)

    def test_constant_in_n(self):
        h = ScoreFunction.opt_complete(0.3)
        assert sum_threshold(h, 50, 0.3).gamma_n == sum_threshold(h, 500, 0.3).gamma_n

    @pytest.mark.slow
    @pytest.mark.parametrize("delta,theta", [(0.5, None), (0.2, None), (0.005, 0.8), (0.6, 0.8)])
    def test_matches_grid_oracle(self, delta, theta):
        density = least_favorable_density(delta, theta)
        oracle = grid_minimize(lambda a: integrate_unit(lambda r: density(r) ** a), 0.0, 1.0)
        if theta is None:
            solved = sum_threshold_gumbel_complete(delta)
        else:
            solved = sum_threshold_gumbel_partial(delta, theta)
        assert abs(solved.optimum - oracle.x) < 1e-4


class TestChernoffThreshold:
    @pytest.mark.slow
    def test_between_the_means(self):
        h = ScoreFunction.ars()
        tau = chernoff_threshold(h, 0.5)
        mean0 = integrate_unit(h.as_scalar())
        assert mean0 < tau
        assert sum_threshold(h, 200, 0.5).gamma_n == pytest.approx(200 * tau)

    @pytest.mark.slow
    def test_chernoff_scaling_for_optimal_score(self):
        spec = sum_threshold(ScoreFunction.opt_complete(0.5), 100, 0.5, scaling="chernoff")
        assert spec.optimum_label == "tau"
        assert spec.gamma_n == pytest.approx(100 * spec.optimum)


class TestRedGreenThresholds:
    def test_fixed_alpha(self):
        assert rg_fixed_alpha_threshold(100, 0.5, 0.05) == pytest.approx(58.224, abs=1e-3)
        assert rg_fixed_alpha_threshold(400, 0.5, 0.05) == pytest.approx(216.449, abs=1e-3)

    def test_sum_complete_is_n(self):
        assert rg_sum_threshold(250, 0.5, None, "complete") == 250

    def test_sum_partial(self):
        """ceil(100 log 2.5 / log 4) = 67."""
        assert rg_sum_threshold(100, 0.5, 0.8, "partial") == 67

    def test_sum_partial_limits(self):
        assert rg_sum_threshold(101, 0.5, 0.5, "partial") == 51
        assert rg_sum_threshold(80, 0.5, 1.0, "partial") == 80

    def test_sum_partial_needs_theta_above_gamma(self):
        with pytest.raises(ParameterError):
            rg_sum_threshold(100, 0.5, None, "partial")
        with pytest.raises(ParameterError):
            rg_sum_threshold(100, 0.75, 0.6, "partial")

    def test_type2_theory(self):
        assert rg_type2_theory(100, 0.5, 1.0, 0.05) == 0.0
        assert rg_type2_theory(400, 0.5, 0.8, 0.05) < rg_type2_theory(100, 0.5, 0.8, 0.05)

    def test_exact_errors_complete(self):
        type1, type2 = rg_exact_errors(250, 0.5, 1.0, 250)
        assert type1 == pytest.approx(0.5**250)
        assert type2 == pytest.approx(0.0, abs=1e-12)

    def test_fixed_alpha_monotone(self):
        lengths = [1, 5, 10, 50, 100, 500, 1000]
        values = [rg_fixed_alpha_threshold(n, 0.5, 0.05) for n in lengths]
        assert values == sorted(values)
        assert len(set(values)) == len(values)
        by_alpha = [rg_fixed_alpha_threshold(100, 0.5, a) for a in (0.2, 0.1, 0.05, 0.01, 0.001)]
        assert all(b > a for a, b in zip(by_alpha, by_alpha[1:], strict=False))

    def test_sum_partial_monotone_in_n(self):
        for theta in (0.6, 0.8, 0.95):
            values = [rg_sum_threshold(n, 0.5, theta, "partial") for n in range(1, 300)]
            assert all(b >= a for a, b in zip(values, values[1:], strict=False))
            assert values[-1] > values[0]

    @pytest.mark.parametrize("n", [1, 4, 8, 12])
    @pytest.mark.parametrize("gamma,theta", [(0.5, 0.8), (0.25, 0.7), (0.5, 1.0)])
    def test_exact_errors_by_enumeration(self, n, gamma, theta):
        """Sum over all 2^n green/red patterns."""
        threshold = rg_sum_threshold(n, gamma, theta, "partial")
        type1 = type2 = 0.0
        for pattern in itertools.product((0, 1), repeat=n):
            k = sum(pattern)
            p0 = gamma**k * (1 - gamma) ** (n - k)
            p1 = theta**k * (1 - theta) ** (n - k)
            if k >= threshold:
                type1 += p0
            else:
                type2 += p1
        exact1, exact2 = rg_exact_errors(n, gamma, theta, threshold)
        assert exact1 == pytest.approx(type1, abs=1e-12)
        assert exact2 == pytest.approx(type2, abs=1e-12)
        if theta == 1.0:
            assert exact1 == pytest.approx(gamma**n, abs=1e-15)


class TestCalibrate:
    def test_redgreen_partial_sum(self):
        request = CalibrationRequest(
            scheme="redgreen", mode="partial", regime="sum", n=100, theta=0.8
        )
        spec = calibrate(request)
        assert spec.gamma_n == 67
        assert spec.score == "count"
        assert 0 < spec.diagnostics["exact_type1"] < 1

    def test_redgreen_fixed_alpha_reports_theory(self):
        request = CalibrationRequest(scheme="redgreen", n=100, theta=0.8)
        spec = calibrate(request)
        assert spec.gamma_n == pytest.approx(58.224, abs=1e-3)
        assert 0 < spec.diagnostics["type2_theory"] < 1

    def test_gumbel_fixed_alpha(self):
        spec = calibrate(CalibrationRequest(n=100, score="log"))
        assert spec.gamma_n == pytest.approx(-83.5515, abs=1e-3)

    def test_gumbel_sum(self):
        spec = calibrate(CalibrationRequest(n=100, regime="sum", delta=0.5))
        assert spec.optimum == pytest.approx(ALPHA_STAR_HALF, abs=1e-5)
        assert spec.optimum_label == "alpha_star"

    def test_request_validation(self):
        with pytest.raises(ValidationError):
            CalibrationRequest(n=100, score="opt")
        with pytest.raises(ValidationError):
            CalibrationRequest(scheme="redgreen", mode="partial", regime="sum", n=100)
        with pytest.raises(ValidationError):
            CalibrationRequest(n=0, score="log")

    def test_as_row_flattens_diagnostics(self):
        row = calibrate(CalibrationRequest(n=100, score="log")).as_row()
        assert row["gamma_n"] == pytest.approx(-83.5515, abs=1e-3)
        assert "diag_mean0" in row


class TestFixedAlphaExponent:
    def test_zero_score(self):
        report = exponent_complete(lambda r: 0.0, 0.5)
        assert report.r_exponent == pytest.approx(0.0, abs=1e-9)

    def test_log_score_at_half(self):
        """-inf_s { -s + log(2 / (2 - s)) } is attained at s = 1."""
        report = exponent_complete(ScoreFunction.log(), 0.5)
        assert report.r_exponent == pytest.approx(1 - math.log(2), abs=1e-6)
        assert report.r_minimizer == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("delta", [0.1, 0.3, 0.5])
    def test_optimal_score_dominates(self, delta):
        best = exponent_complete(ScoreFunction.opt_complete(delta), delta).r_exponent
        for baseline in (ScoreFunction.ars(), ScoreFunction.log()):
            assert best >= exponent_complete(baseline, delta).r_exponent - 1e-6

    def test_partial_point(self):
        report = exponent_complete(ScoreFunction.opt_partial(0.3, 0.8), 0.3, 0.8)
        assert report.theta == 0.8
        assert report.r_exponent > 0


class TestSumExponent:
    def test_zero_score(self):
        report = exponent_sum(lambda r: 0.0, 0.5)
        assert report.s_exponent == pytest.approx(0.0, abs=1e-9)

    def test_objective_symmetry(self):
        """Swapping H0 and H1 with h -> -h and (theta1, theta2) -> (theta2, theta1)."""
        f = ScoreFunction.log().as_scalar()
        density = least_favorable_density(0.4)
        forward = sum_objective(f, None, density, 0.4, 0.7)
        backward = sum_objective(lambda r: -f(r), density, None, 0.7, 0.4)
        assert forward == pytest.approx(backward, abs=1e-10)

    @pytest.mark.slow
    def test_optimal_score_dominates(self):
        best = exponent_sum(ScoreFunction.opt_complete(0.5), 0.5).s_exponent
        assert best > 0
        for baseline in (ScoreFunction.ars(), ScoreFunction.log()):
            assert best >= exponent_sum(baseline, 0.5).s_exponent - 1e-5
