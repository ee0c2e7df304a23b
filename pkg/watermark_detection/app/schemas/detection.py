"""Pydantic schemas for detection requests and reports."""

from typing import Literal

from pydantic import BaseModel, model_validator

from watermark_detection.app.schemas.calibration import (
    ExponentReport,
    Regime,
    SumScaling,
    ThresholdSpec,
)


class DetectionRequest(BaseModel):
    """A suspect token sequence plus what the victim knows: salt, scheme and parameters."""

    tokens: list[int]
    prompt: list[int] = []
    salt: int
    scheme: Literal["gumbel", "redgreen"] = "gumbel"
    mode: Literal["complete", "partial"] = "complete"
    score: Literal["opt", "ars", "log", "count"] = "opt"
    regime: Regime = "fixed_alpha"
    alpha: float = 0.05
    delta: float | None = None
    theta: float | None = None
    gamma: float = 0.5
    m: int = 1000
    window_width: int = 5
    allow_padding: bool = True
    sum_scaling: SumScaling = "paper"
    dump_pivotals: bool = False
    with_exponents: bool = False

    model_config = {"extra": "forbid", "frozen": True}

    @model_validator(mode="after")
    def _check_tokens(self) -> "DetectionRequest":
        if not self.tokens:
            raise ValueError("token sequence must not be empty")
        if self.m < 2:
            raise ValueError(f"vocabulary size m must be at least 2, got {self.m}")
        for position, token in enumerate(self.tokens):
            if not 0 <= token < self.m:
                raise ValueError(f"token {token} at position {position} outside 0..{self.m - 1}")
        if not 0 <= self.salt < 2**64:
            raise ValueError("salt must be a 64-bit unsigned integer")
        return self

    @property
    def n(self) -> int:
        return len(self.tokens)


class DetectionReport(BaseModel):
    """Outcome of one test: statistic, threshold and decision."""

    n: int
    statistic: float
    threshold: ThresholdSpec
    reject: bool
    pivotals: list[float] | None = None
    exponents: ExponentReport | None = None

    @property
    def decision(self) -> str:
        return "reject H0" if self.reject else "retain H0"

    def as_row(self) -> dict:
        """One flat CSV-ready row."""
        return {
            "scheme": self.threshold.scheme,
            "mode": self.threshold.mode,
            "regime": self.threshold.regime,
            "score": self.threshold.score,
            "n": self.n,
            "statistic": self.statistic,
            "threshold": self.threshold.gamma_n,
            "decision": self.decision,
        }
