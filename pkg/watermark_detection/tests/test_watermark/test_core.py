"""Tests for NTP distributions, class membership and least-favorable points."""

import numpy as np
import pytest
from pydantic import ValidationError

from watermark_detection.exceptions import CapacityError, DistributionError, ParameterError
from watermark_detection.watermark.core import (
    DistributionClassParams,
    FeatureMatrix,
    NtpDistribution,
    VocabSpec,
    floor_inverse_gap,
    in_feature_class,
    least_favorable_feature_matrix,
    least_favorable_ntp,
    ntp_from_probs,
    tilde_delta,
    validate_ntp,
)


class TestNtpDistribution:
    def test_valid_vector_is_read_only(self):
        """A validated vector cannot be mutated afterwards."""
        p = ntp_from_probs([0.25, 0.25, 0.5])
        assert p.m == 3
        assert p.max_prob == 0.5
        with pytest.raises(ValueError):
            p.probs[0] = 1.0

    def test_rejects_bad_sum(self):
        """Vectors are never renormalized silently."""
        with pytest.raises(DistributionError):
            ntp_from_probs([0.5, 0.4])

    def test_rejects_negative_entry(self):
        with pytest.raises(DistributionError):
            ntp_from_probs([1.2, -0.2])

    def test_support(self):
        """Support lists the indices with positive mass."""
        p = NtpDistribution(np.array([0.6, 0.0, 0.4, 0.0]))
        np.testing.assert_array_equal(p.support, [0, 2])

    def test_vocab_contains(self):
        vocab = VocabSpec(4)
        assert vocab.contains(3)
        assert not vocab.contains(4)
        with pytest.raises(ParameterError):
            VocabSpec(1)


class TestValidateNtp:
    def test_boundary_max_equals_one_minus_delta(self):
        """max(p) = 1 - delta is inside the class."""
        assert validate_ntp(np.array([0.5, 0.5]), 0.5)

    def test_outside_class(self):
        assert not validate_ntp(np.array([0.9, 0.1]), 0.2)

    def test_with_zero_entries(self):
        assert validate_ntp(np.array([0.6, 0.4, 0.0, 0.0]), 0.4)


class TestLeastFavorableNtp:
    def test_delta_half(self):
        """Two spikes of 1/2 and no remainder."""
        p = least_favorable_ntp(0.5, 4)
        np.testing.assert_allclose(p.probs, [0.5, 0.5, 0.0, 0.0])

    def test_delta_point_four(self):
        """floor(1/0.6) = 1 spike of 0.6 and a remainder of 0.4."""
        p = least_favorable_ntp(0.4, 4)
        np.testing.assert_allclose(p.probs, [0.6, 0.4, 0.0, 0.0])

    def test_delta_two_thirds(self):
        """Three spikes of 1/3 summing to one."""
        p = least_favorable_ntp(2 / 3, 5)
        np.testing.assert_allclose(p.probs, [1 / 3, 1 / 3, 1 / 3, 0.0, 0.0], atol=1e-12)

    def test_belongs_to_its_class(self):
        for delta in (0.05, 0.3, 0.5, 0.77):
            assert validate_ntp(least_favorable_ntp(delta, 50), delta)

    def test_vocabulary_too_small(self):
        """Delta 0.9 needs floor(10) + 1 = 11 tokens."""
        with pytest.raises(CapacityError):
            least_favorable_ntp(0.9, 10)

    def test_floor_guard_at_integer_points(self):
        """1/(1 - 2/3) evaluates to 2.9999... in floating point."""
        assert floor_inverse_gap(2 / 3) == 3
        assert tilde_delta(2 / 3) == 1.0
        assert tilde_delta(0.4) == pytest.approx(0.6)


class TestLeastFavorableFeatureMatrix:
    def test_two_tokens(self):
        q = least_favorable_feature_matrix(0.8, 2)
        np.testing.assert_allclose(q.rows, [[0.8, 0.2], [0.2, 0.8]])

    def test_theta_one_is_identity(self):
        q = least_favorable_feature_matrix(1.0, 3)
        np.testing.assert_allclose(q.rows, np.eye(3))

    def test_three_tokens(self):
        """Off-diagonal mass goes to column 1 in row 0 and column 0 elsewhere."""
        q = least_favorable_feature_matrix(0.8, 3)
        np.testing.assert_allclose(q.rows, [[0.8, 0.2, 0.0], [0.2, 0.8, 0.0], [0.2, 0.0, 0.8]])

    def test_in_class(self):
        q = least_favorable_feature_matrix(0.7, 6)
        assert in_feature_class(q, 0.7)
        assert not in_feature_class(q, 0.75)

    @pytest.mark.parametrize("theta", [0.51, 0.6, 0.75, 0.8, 0.95, 1.0])
    @pytest.mark.parametrize("m", [2, 3, 10, 1000])
    def test_member_of_feature_class(self, theta, m):
        q = least_favorable_feature_matrix(theta, m)
        assert q.shape == (m, m)
        assert np.all(q.rows >= 0)
        np.testing.assert_allclose(q.rows.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diag(q.rows) >= theta)
        assert in_feature_class(q, theta)

    def test_rows_must_be_stochastic(self):
        with pytest.raises(DistributionError):
            FeatureMatrix(np.array([[0.5, 0.4], [0.0, 1.0]]))

    def test_theta_out_of_range(self):
        with pytest.raises(ParameterError):
            least_favorable_feature_matrix(0.5, 3)


class TestDistributionClassParams:
    def test_defaults(self):
        params = DistributionClassParams()
        assert params.delta == 0.3
        assert params.theta is None
        assert params.gamma == 0.5

    def test_rejects_theta_at_half(self):
        with pytest.raises(ValidationError):
            DistributionClassParams(theta=0.5)

    def test_rejects_delta_one(self):
        with pytest.raises(ValidationError):
            DistributionClassParams(delta=1.0)
