"""Schemas for Monte Carlo experiment configs and the error curves they produce."""

from dataclasses import dataclass, field
from typing import Literal

from pydantic import BaseModel, model_validator

from watermark_detection.app.schemas.calibration import Regime, SumScaling

Metric = Literal["type1", "type2", "type1+type2", "type2_theory"]

PAPER_LENGTHS = [50, 100, 150, 200, 250, 300, 350, 400, 450, 500]
DEFAULT_DELTA_RANGE = (0.001, 0.5)
DEFAULT_PARTIAL_DELTA = 0.005


class ExperimentConfig(BaseModel):
    """One error-vs-length experiment.

    The generator's delta is either fixed (`delta`) or drawn per rep from
    `delta_range`. When neither is set, complete inheritance draws from
    [0.001, 0.5] and partial inheritance uses 0.005.
    """

    name: str = "custom"
    scheme: Literal["gumbel", "redgreen"] = "gumbel"
    mode: Literal["complete", "partial"] = "complete"
    regime: Regime = "fixed_alpha"
    m: int = 1000
    reps: int = 5000
    lengths: list[int] = PAPER_LENGTHS
    alpha: float = 0.05
    delta: float | None = None
    delta_range: tuple[float, float] | None = None
    theta: float = 0.8
    gamma: float = 0.5
    seed: int = 0
    salt: int = 0x5EED
    scores: list[Literal["opt", "ars", "log"]] = ["opt", "ars", "log"]
    theta_sweep: list[float] = [0.7, 0.8, 0.9, 0.95]
    ntp_policy: Literal["spike", "uniform", "dirichlet"] | None = None
    score_delta: Literal["oracle"] | float = "oracle"
    delta_grid: float = 0.001  # oracle deltas are rounded to this grid before calibration
    sum_scaling: SumScaling = "paper"
    window_width: int = 5

    model_config = {"extra": "forbid", "frozen": True}

    @model_validator(mode="after")
    def _check_config(self) -> "ExperimentConfig":
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if not self.lengths or min(self.lengths) < 1:
            raise ValueError("lengths must be a non-empty list of positive integers")
        if self.m < 2:
            raise ValueError(f"m must be at least 2, got {self.m}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.delta is not None and self.delta_range is not None:
            raise ValueError("set either delta or delta_range, not both")
        if self.delta_range is not None:
            lo, hi = self.delta_range
            if not 0.0 < lo <= hi < 1.0:
                raise ValueError(
                    f"delta_range must satisfy 0 < lo <= hi < 1, got {self.delta_range}"
                )
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.scheme == "gumbel" and not 0.5 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (1/2, 1], got {self.theta}")
        if self.scheme == "redgreen" and not self.gamma <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [gamma, 1], got {self.theta}")
        if isinstance(self.score_delta, float) and not 0.0 < self.score_delta < 1.0:
            raise ValueError(f"score_delta must lie in (0, 1), got {self.score_delta}")
        if not 0.0 < self.delta_grid < 0.5:
            raise ValueError(f"delta_grid must lie in (0, 0.5), got {self.delta_grid}")
        if not self.scores:
            raise ValueError("scores must not be empty")
        return self

    @property
    def generator_delta(self) -> float | tuple[float, float]:
        """Fixed delta or the (lo, hi) interval the generator draws it from."""
        if self.delta is not None:
            return self.delta
        if self.delta_range is not None:
            return self.delta_range
        return DEFAULT_DELTA_RANGE if self.mode == "complete" else DEFAULT_PARTIAL_DELTA

    @property
    def policy(self) -> str:
        """NTP policy of the H1 generator: spike for Gumbel, flat Dirichlet for red-green."""
        if self.ntp_policy is not None:
            return self.ntp_policy
        return "spike" if self.scheme == "gumbel" else "dirichlet"

    @property
    def score_names(self) -> list[str]:
        return ["count"] if self.scheme == "redgreen" else list(self.scores)

    @property
    def label_theta(self) -> float | None:
        return self.theta if self.mode == "partial" else None


@dataclass
class CurvePoint:
    n: int
    metric: str
    estimate: float
    stderr: float
    reps: int


@dataclass
class ErrorCurve:
    """Error estimates against text length for one score, scheme, mode and regime."""

    scheme: str
    mode: str
    regime: str
    score: str
    theta: float | None
    seed: int
    points: list[CurvePoint] = field(default_factory=list)

    def estimates(self, metric: str) -> dict[int, float]:
        """n -> estimate for one metric."""
        return {p.n: p.estimate for p in self.points if p.metric == metric}

    def stderrs(self, metric: str) -> dict[int, float]:
        return {p.n: p.stderr for p in self.points if p.metric == metric}
