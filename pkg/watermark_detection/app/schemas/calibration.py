"""Pydantic schemas for threshold calibration requests and results."""

from typing import Any, Literal

from pydantic import BaseModel, model_validator

Regime = Literal["fixed_alpha", "sum"]
SumScaling = Literal["paper", "chernoff"]


class CalibrationRequest(BaseModel):
    """Everything needed to resolve a rejection threshold gamma_n."""

    scheme: Literal["gumbel", "redgreen"] = "gumbel"
    mode: Literal["complete", "partial"] = "complete"
    regime: Regime = "fixed_alpha"
    n: int
    score: Literal["opt", "ars", "log", "count"] = "opt"
    alpha: float = 0.05
    delta: float | None = None
    theta: float | None = None
    gamma: float = 0.5
    sum_scaling: SumScaling = "paper"

    model_config = {"extra": "forbid", "frozen": True}

    @model_validator(mode="after")
    def _check_parameters(self) -> "CalibrationRequest":
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.theta is not None and not 0.5 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (1/2, 1], got {self.theta}")
        if self.scheme == "redgreen":
            if self.regime == "sum" and self.mode == "partial" and self.theta is None:
                raise ValueError("red-green partial sum-errors threshold requires theta")
            return self
        if self.score == "count":
            raise ValueError("the count score applies to the red-green scheme only")
        if self.mode == "partial" and self.score == "opt" and self.theta is None:
            raise ValueError("the partial optimal score requires theta")
        needs_delta = self.score == "opt" or self.regime == "sum"
        if needs_delta and self.delta is None:
            raise ValueError("this threshold requires delta")
        return self


class ThresholdSpec(BaseModel):
    """A resolved rejection threshold and the optimizer values behind it."""

    scheme: str
    mode: str
    regime: Regime
    score: str
    n: int
    gamma_n: float
    alpha: float | None = None
    delta: float | None = None
    theta: float | None = None
    gamma: float | None = None
    optimum: float | None = None  # alpha*, beta* or the per-token Chernoff threshold
    optimum_label: str | None = None
    diagnostics: dict[str, Any] = {}

    def as_row(self) -> dict[str, Any]:
        """Flat key-value view for printing and CSV export."""
        row = self.model_dump(exclude={"diagnostics"})
        row.update({f"diag_{k}": v for k, v in self.diagnostics.items()})
        return row


class ExponentReport(BaseModel):
    """Error exponents of a score at the least-favorable alternative."""

    score: str
    delta: float
    theta: float | None = None
    r_exponent: float | None = None  # fixed-alpha exponent R
    s_exponent: float | None = None  # sum-of-errors exponent S
    r_minimizer: float | None = None
    s_minimizer: tuple[float, float] | None = None
    diagnostics: dict[str, Any] = {}
