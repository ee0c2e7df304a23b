"""Pivotal statistics, score functions and H1 distribution evaluators.

Gumbel pivotal Y_t = U_{t, omega_t} is U(0, 1) under H0 and stochastically
larger under H1; red-green pivotal Y_t = 1{omega_t in green} is Bernoulli(gamma)
under H0. A test rejects H0 when sum_t h(Y_t) >= gamma_n.

Score functions:
- ars: -log(1 - r)
- log: log r
- opt_complete(delta): log of the H1 density of Y at the least-favorable P*
- opt_partial(delta, theta): log of the H1 density at (P*, Q*)
- identity: the red-green count score
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from watermark_detection.exceptions import ContractError, DistributionError, ParameterError
from watermark_detection.watermark.core import (
    FeatureMatrix,
    NtpDistribution,
    floor_inverse_gap,
    tilde_delta,
)
from watermark_detection.watermark.keying import GreenList, GumbelKey

logger = logging.getLogger(__name__)

ScoreKind = Literal["ars", "log", "opt_complete", "opt_partial", "identity"]

# CLI / config score names
SCORE_NAMES = ("opt", "ars", "log", "count")


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def _power(r: np.ndarray, exponent: float) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.power(r, exponent)


def _remainder_power(r: np.ndarray, delta: float) -> np.ndarray:
    """r^(td / (1 - td)) with td = tilde_delta(delta); the td = 1 limit is 1{r = 1}."""
    td = tilde_delta(delta)
    if td >= 1.0:
        return (r >= 1.0).astype(np.float64)
    return _power(r, td / (1.0 - td))


@dataclass(frozen=True)
class ScoreFunction:
    """A score h applied to pivotal values."""

    kind: ScoreKind
    delta: float | None = None
    theta: float | None = None

    def __post_init__(self) -> None:
        if self.kind in ("opt_complete", "opt_partial"):
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise ParameterError(f"{self.kind} needs delta in (0, 1), got {self.delta}")
        if self.kind == "opt_partial":
            if self.theta is None or not 0.5 < self.theta <= 1.0:
                raise ParameterError(f"opt_partial needs theta in (1/2, 1], got {self.theta}")

    @classmethod
    def ars(cls) -> "ScoreFunction":
        return cls("ars")

    @classmethod
    def log(cls) -> "ScoreFunction":
        return cls("log")

    @classmethod
    def opt_complete(cls, delta: float) -> "ScoreFunction":
        return cls("opt_complete", delta=delta)

    @classmethod
    def opt_partial(cls, delta: float, theta: float) -> "ScoreFunction":
        return cls("opt_partial", delta=delta, theta=theta)

    @classmethod
    def identity(cls) -> "ScoreFunction":
        return cls("identity")

    @classmethod
    def from_name(
        cls,
        name: str,
        delta: float | None = None,
        theta: float | None = None,
        mode: str = "complete",
    ) -> "ScoreFunction":
        """Build a score from its CLI name ("opt", "ars", "log", "count").

        "opt" resolves to opt_partial in partial mode and opt_complete otherwise.
        """
        if name == "ars":
            return cls.ars()
        if name == "log":
            return cls.log()
        if name == "count":
            return cls.identity()
        if name == "opt":
            if delta is None:
                raise ParameterError("the optimal score needs delta")
            if mode == "partial":
                if theta is None:
                    raise ParameterError("the partial optimal score needs theta")
                return cls.opt_partial(delta, theta)
            return cls.opt_complete(delta)
        raise ParameterError(f"unknown score {name!r}; choose from {', '.join(SCORE_NAMES)}")

    def as_scalar(self) -> Callable[[float], float]:
        """A float -> float closure of h for quadrature integrands."""
        if self.kind == "identity":
            return float
        if self.kind == "ars":
            return lambda r: -math.log1p(-r) if r < 1.0 else math.inf
        if self.kind == "log":
            return lambda r: math.log(r) if r > 0.0 else -math.inf
        density = self.density_scalar()
        return lambda r: _safe_log(density(r))

    def density_scalar(self) -> Callable[[float], float]:
        """exp(h) for the optimal scores: the H1 pivotal density at the least-favorable point."""
        if self.kind not in ("opt_complete", "opt_partial"):
            raise ParameterError(f"score {self.kind} is not a log-density")
        delta, theta = self.delta, self.theta
        a = delta / (1.0 - delta)
        k = floor_inverse_gap(delta)
        td = tilde_delta(delta)
        b = None if td >= 1.0 else td / (1.0 - td)

        def remainder(r: float) -> float:
            if b is None:
                return 1.0 if r >= 1.0 else 0.0
            return r**b

        if self.kind == "opt_complete":
            return lambda r: k * r**a + remainder(r)
        if delta >= 0.5:
            coef = k * theta + theta / delta - 1.0 / delta
            base = (1.0 - theta) / delta
            return lambda r: base + coef * r**a + theta * remainder(r)
        inv = 1.0 / a
        return lambda r: 2.0 * (1.0 - theta) + (2.0 * theta - 1.0) * (r**inv + r**a)

    @property
    def name(self) -> str:
        return {"opt_complete": "opt", "opt_partial": "opt", "identity": "count"}.get(
            self.kind, self.kind
        )

    def __call__(self, r: np.ndarray | float) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "identity":
                return r.copy()
            if self.kind == "ars":
                return -np.log1p(-r)
            if self.kind == "log":
                return np.log(r)
            if self.kind == "opt_complete":
                return np.log(self._density_complete(r))
            return np.log(self._density_partial(r))

    def _density_complete(self, r: np.ndarray) -> np.ndarray:
        delta = self.delta
        k = floor_inverse_gap(delta)
        return k * _power(r, delta / (1.0 - delta)) + _remainder_power(r, delta)

    def _density_partial(self, r: np.ndarray) -> np.ndarray:
        delta, theta = self.delta, self.theta
        a = delta / (1.0 - delta)
        if delta >= 0.5:
            k = floor_inverse_gap(delta)
            coef = k * theta + theta / delta - 1.0 / delta
            return (1.0 - theta) / delta + coef * _power(r, a) + theta * _remainder_power(r, delta)
        return 2.0 * (1.0 - theta) + (2.0 * theta - 1.0) * (_power(r, 1.0 / a) + _power(r, a))


def score(h: ScoreFunction, r: float) -> float:
    """Evaluate h at a single pivotal value.

    Raises:
        ParameterError: If r lies outside [0, 1].
    """
    if not 0.0 <= r <= 1.0:
        raise ParameterError(f"pivotal value must lie in [0, 1], got {r}")
    return float(h(r))


# --- pivotal statistics ----------------------------------------------------


def pivotal_gumbel(token: int, key: GumbelKey) -> float:
    """Y = U_token."""
    if not 0 <= token < key.m:
        raise ContractError(f"token {token} outside vocabulary of size {key.m}")
    return float(key.u[token])


def pivotal_rg(token: int, green: GreenList) -> float:
    """Y = 1{token in green}."""
    if not 0 <= token < green.m:
        raise ContractError(f"token {token} outside vocabulary of size {green.m}")
    return 1.0 if green.contains(token) else 0.0


def sum_scores(pivotals: Sequence[float] | np.ndarray, h: ScoreFunction) -> float:
    """The test statistic sum_t h(Y_t); any -inf term makes the sum -inf."""
    values = np.asarray(pivotals, dtype=np.float64)
    if values.size == 0:
        raise ContractError("cannot score an empty sequence")
    return float(np.sum(h(values)))


def sum_scores_batch(pivotals: np.ndarray, h: ScoreFunction) -> np.ndarray:
    """Row-wise statistics for pivotals of shape (R, n)."""
    return np.sum(h(pivotals), axis=1)


# --- H1 distribution of the Gumbel pivotal ---------------------------------


def _probs(p: NtpDistribution | np.ndarray) -> np.ndarray:
    return p.probs if isinstance(p, NtpDistribution) else np.asarray(p, dtype=np.float64)


def _rows(q: FeatureMatrix | np.ndarray, m: int) -> np.ndarray:
    rows = q.rows if isinstance(q, FeatureMatrix) else np.asarray(q, dtype=np.float64)
    if rows.shape != (m, m):
        raise DistributionError(f"feature matrix shape {rows.shape} does not match m={m}")
    return rows


def cdf_h1_gumbel_complete(r, p: NtpDistribution | np.ndarray):
    """P_H1(Y <= r | P) = sum_w P_w r^(1/P_w), over positive entries."""
    probs = _probs(p)
    probs = probs[probs > 0]
    r_arr = np.asarray(r, dtype=np.float64)
    out = np.sum(probs * _power(r_arr[..., None], 1.0 / probs), axis=-1)
    return float(out) if out.ndim == 0 else out


def density_h1_gumbel_complete(r, p: NtpDistribution | np.ndarray):
    """d/dr of cdf_h1_gumbel_complete: sum_w r^(1/P_w - 1)."""
    probs = _probs(p)
    probs = probs[probs > 0]
    r_arr = np.asarray(r, dtype=np.float64)
    out = np.sum(_power(r_arr[..., None], 1.0 / probs - 1.0), axis=-1)
    return float(out) if out.ndim == 0 else out


def _partial_weights(probs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Column weights c_j = sum_{i != j} p_i / (1 - p_j) q_ij (zero where p_i = 0)."""
    off = rows.copy()
    np.fill_diagonal(off, 0.0)
    gap = 1.0 - probs
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(
            (probs[:, None] > 0) & (gap[None, :] > 0),
            probs[:, None] / np.where(gap > 0, gap, 1.0)[None, :],
            0.0,
        )
    return np.sum(coef * off, axis=0)


def cdf_h1_gumbel_partial(r, p: NtpDistribution | np.ndarray, q: FeatureMatrix | np.ndarray):
    """P_H1(Y <= r | P, Q) under partial inheritance.

    sum_i sum_{j != i} p_i / (1 - p_j) (r - p_j r^(1/p_j)) q_ij + sum_i p_i r^(1/p_i) q_ii
    """
    probs = _probs(p)
    rows = _rows(q, probs.size)
    weights = _partial_weights(probs, rows)
    r_arr = np.asarray(r, dtype=np.float64)[..., None]
    positive = probs > 0
    safe = np.where(positive, probs, 1.0)
    own = np.where(positive, probs * _power(r_arr, 1.0 / safe), 0.0)
    moved = r_arr - own
    out = np.sum(weights * moved, axis=-1) + np.sum(np.diag(rows) * own, axis=-1)
    return float(out) if out.ndim == 0 else out


def density_h1_gumbel_partial(r, p: NtpDistribution | np.ndarray, q: FeatureMatrix | np.ndarray):
    """d/dr of cdf_h1_gumbel_partial."""
    probs = _probs(p)
    rows = _rows(q, probs.size)
    weights = _partial_weights(probs, rows)
    r_arr = np.asarray(r, dtype=np.float64)[..., None]
    positive = probs > 0
    safe = np.where(positive, probs, 1.0)
    own = np.where(positive, _power(r_arr, 1.0 / safe - 1.0), 0.0)
    out = np.sum(weights * (1.0 - own), axis=-1) + np.sum(np.diag(rows) * own, axis=-1)
    return float(out) if out.ndim == 0 else out
