"""Vocabulary, probability vectors, distribution classes and least-favorable points.

The detection theory works over two classes of alternatives:

1. P_delta: NTP distributions whose largest entry is at most 1 - delta.
2. Q_theta: feature matrices (conditional token laws of a suspect model) whose
   diagonal is at least theta, i.e. the suspect inherits the watermarked
   choice with probability at least theta.

The minimax tests are calibrated at the least-favorable members of these
classes, P* and Q*, built here.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, field_validator

from watermark_detection.exceptions import CapacityError, DistributionError, ParameterError

PROB_TOL = 1e-12  # tolerance on probability sums and class bounds
FLOOR_EPS = 1e-9  # guard for floor(1 / (1 - delta)) at integer points


@dataclass(frozen=True)
class VocabSpec:
    """Vocabulary of m abstract tokens 0..m-1."""

    m: int

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ParameterError(f"vocabulary size must be at least 2, got {self.m}")

    def contains(self, token: int) -> bool:
        return 0 <= token < self.m


@dataclass(frozen=True)
class NtpDistribution:
    """Next-token prediction distribution P_t over the vocabulary.

    Construction validates the vector; it is never renormalized silently.
    """

    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64).reshape(-1)
        if probs.size < 2:
            raise DistributionError(f"NTP vector needs at least 2 entries, got {probs.size}")
        if not np.all(np.isfinite(probs)):
            raise DistributionError("NTP vector contains non-finite entries")
        if np.any(probs < 0):
            raise DistributionError(f"NTP vector has negative entry {probs.min():.3g}")
        total = float(probs.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise DistributionError(f"NTP vector sums to {total!r}, expected 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return int(self.probs.size)

    @property
    def max_prob(self) -> float:
        return float(self.probs.max())

    @property
    def support(self) -> np.ndarray:
        """Indices with positive probability."""
        return np.flatnonzero(self.probs > 0)

    def __repr__(self) -> str:
        return f"NtpDistribution(m={self.m}, max_prob={self.max_prob:.6g})"


def ntp_from_probs(values) -> NtpDistribution:
    """Build a validated NTP distribution from any array-like."""
    return NtpDistribution(np.asarray(values, dtype=np.float64))


class DistributionClassParams(BaseModel):
    """Parameters of the classes P_delta, Q_theta and the green-list fraction."""

    delta: float = 0.3
    theta: float | None = None
    gamma: float = 0.5

    model_config = {"frozen": True}

    @field_validator("delta")
    @classmethod
    def _delta_in_range(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {v}")
        return v

    @field_validator("theta")
    @classmethod
    def _theta_in_range(cls, v: float | None) -> float | None:
        if v is not None and not 0.5 < v <= 1.0:
            raise ValueError(f"theta must lie in (1/2, 1], got {v}")
        return v

    @field_validator("gamma")
    @classmethod
    def _gamma_in_range(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {v}")
        return v


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-stochastic matrix of conditional token laws under H1.

    Row i is the law of the emitted token given that the watermark rule
    selected token i (Gumbel) or list A_i (red-green).
    """

    rows: np.ndarray = field(repr=False)
    scheme: str = "gumbel"

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DistributionError(f"feature matrix must be 2-D, got shape {rows.shape}")
        if np.any(rows < 0):
            raise DistributionError("feature matrix has negative entries")
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise DistributionError(f"feature matrix row {bad} sums to {sums[bad]!r}")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape  # type: ignore[return-value]

    def __repr__(self) -> str:
        return f"FeatureMatrix(shape={self.shape}, scheme={self.scheme!r})"


def floor_inverse_gap(delta: float) -> int:
    """floor(1 / (1 - delta)), robust to rounding just below an integer."""
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    return math.floor(1.0 / (1.0 - delta) + FLOOR_EPS)


def tilde_delta(delta: float) -> float:
    """(1 - delta) * floor(1 / (1 - delta)); equals 1 when 1/(1 - delta) is integral."""
    value = (1.0 - delta) * floor_inverse_gap(delta)
    # Snap the integral case so callers can test it exactly
    return 1.0 if abs(value - 1.0) <= FLOOR_EPS else min(value, 1.0)


def validate_ntp(p: NtpDistribution | np.ndarray, delta: float) -> bool:
    """Return True iff p belongs to P_delta, i.e. max(p) <= 1 - delta.

    Raises:
        DistributionError: If p is not a valid probability vector.
    """
    dist = p if isinstance(p, NtpDistribution) else ntp_from_probs(p)
    return dist.max_prob <= 1.0 - delta + PROB_TOL


def least_favorable_ntp(delta: float, m: int) -> NtpDistribution:
    """The least-favorable NTP distribution P* of the class P_delta.

    floor(1/(1-delta)) entries equal to 1 - delta, one remainder entry
    1 - (1-delta)*floor(1/(1-delta)), zeros elsewhere.

    Raises:
        CapacityError: If m cannot hold the pattern.
    """
    k = floor_inverse_gap(delta)
    if m < k + 1:
        raise CapacityError(f"m={m} too small for delta={delta}: need at least {k + 1} tokens")
    probs = np.zeros(m)
    probs[:k] = 1.0 - delta
    probs[k] = max(0.0, 1.0 - tilde_delta(delta))
    return NtpDistribution(probs)


def least_favorable_feature_matrix(theta: float, m: int) -> FeatureMatrix:
    """The least-favorable feature matrix Q* of the class Q_theta.

    Diagonal theta; row 0 puts 1 - theta on column 1, every other row puts
    1 - theta on column 0.
    """
    if not 0.5 < theta <= 1.0:
        raise ParameterError(f"theta must lie in (1/2, 1], got {theta}")
    if m < 2:
        raise ParameterError(f"m must be at least 2, got {m}")
    rows = np.eye(m) * theta
    rows[0, 1] = 1.0 - theta
    rows[1:, 0] = 1.0 - theta
    return FeatureMatrix(rows, scheme="gumbel")


def in_feature_class(q: FeatureMatrix, theta: float) -> bool:
    """True iff every diagonal entry of q is at least theta."""
    rows = q.rows
    k = min(rows.shape)
    return bool(np.all(np.diag(rows)[:k] >= theta - PROB_TOL))
