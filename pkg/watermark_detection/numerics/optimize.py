"""One-dimensional minimizers used by threshold calibration and error exponents.

The objectives are unimodal in practice but come without a convexity proof,
so every solver result reports its final bracket and whether the objective
looked flat, and tests cross-check the solver against `grid_minimize`.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from watermark_detection.exceptions import NumericalError

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

DEFAULT_TOL = 1e-8
FLAT_TOL = 1e-10  # relative spread below which an objective counts as flat
GRID_POINTS = 10_000


@dataclass(frozen=True)
class MinimizeResult:
    """Outcome of a 1-D minimization."""

    x: float
    fun: float
    bracket: tuple[float, float]  # final bracket, or the whole search interval if flat
    iterations: int
    flat: bool = False

    def diagnostics(self) -> dict:
        return {
            "x": self.x,
            "fun": self.fun,
            "bracket": self.bracket,
            "iterations": self.iterations,
            "flat": self.flat,
        }


def _finite_or_inf(value: float) -> float:
    return value if math.isfinite(value) else math.inf


def golden_section(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
) -> MinimizeResult:
    """Golden-section search for the minimum of a unimodal f on (a, b).

    Non-finite objective values count as +inf. When the objective is flat
    across the interval the result carries the whole interval as its bracket.

    Raises:
        NumericalError: If the bracket is empty or f is non-finite at both interior points.
    """
    a, b = min(a, b), max(a, b)
    if not b > a:
        raise NumericalError("empty bracket", {"a": a, "b": b})
    lo, hi = a, b
    h = hi - lo
    c = lo + INV_PHI_SQUARE * h
    d = lo + INV_PHI * h
    yc = _finite_or_inf(f(c))
    yd = _finite_or_inf(f(d))
    if math.isinf(yc) and math.isinf(yd):
        raise NumericalError("objective non-finite at both golden-section points", {"a": a, "b": b})

    early_values = [yc, yd]
    iterations = 0
    while h > tol and iterations < max_iter:
        iterations += 1
        if yc < yd:
            hi, d, yd = d, c, yc
            h = INV_PHI * h
            c = lo + INV_PHI_SQUARE * h
            yc = _finite_or_inf(f(c))
        else:
            lo, c, yc = c, d, yd
            h = INV_PHI * h
            d = lo + INV_PHI * h
            yd = _finite_or_inf(f(d))
        if iterations <= 3:
            early_values.append(yc if yc < yd else yd)

    x, fun = (c, yc) if yc < yd else (d, yd)
    finite = [p for p in early_values if math.isfinite(p)]
    spread = max(finite) - min(finite) if finite else math.inf
    flat = spread <= FLAT_TOL * (1.0 + abs(fun))
    if flat:
        logger.warning(f"Flat objective on ({a:.6g}, {b:.6g}); spread {spread:.3g}")
        return MinimizeResult(
            x=0.5 * (a + b), fun=fun, bracket=(a, b), iterations=iterations, flat=True
        )
    if iterations >= max_iter and h > tol:
        logger.warning(f"Golden-section stopped at max_iter={max_iter} with width {h:.3g}")
    logger.debug(f"Golden-section minimum {fun:.10g} at {x:.10g} after {iterations} steps")
    return MinimizeResult(x=x, fun=fun, bracket=(lo, hi), iterations=iterations)


def expand_bracket(
    f: Callable[[float], float],
    lo: float = 0.0,
    hi: float = 1.0,
    grow: float = 2.0,
    limit: float = 1e3,
) -> tuple[float, float, bool]:
    """Grow [lo, hi] geometrically until f stops decreasing at the upper end.

    Returns:
        (lo, hi, shrunk): shrunk is True when f was non-finite somewhere on the
        way; the upper end is then the first non-finite point met while growing,
        or the first finite point met while pulling back from a non-finite hi.
    """
    previous = _finite_or_inf(f(hi))
    if math.isinf(previous):
        # Pull back toward lo until the objective is finite
        while math.isinf(previous) and hi - lo > 1e-9:
            hi = lo + (hi - lo) / grow
            previous = _finite_or_inf(f(hi))
        return lo, hi, True
    while hi * grow <= limit:
        candidate = hi * grow
        value = _finite_or_inf(f(candidate))
        if math.isinf(value):
            return lo, candidate, True
        if value >= previous:
            return lo, candidate, False
        hi, previous = candidate, value
    return lo, hi * grow, False


def grid_minimize(
    f: Callable[[float], float], a: float, b: float, points: int = GRID_POINTS
) -> MinimizeResult:
    """Brute-force minimum over `points` interior grid points of (a, b)."""
    grid = np.linspace(a, b, points + 2)[1:-1]
    values = np.array([_finite_or_inf(f(float(x))) for x in grid])
    best = int(np.argmin(values))
    spacing = (b - a) / (points + 1)
    return MinimizeResult(
        x=float(grid[best]),
        fun=float(values[best]),
        bracket=(float(grid[best]) - spacing, float(grid[best]) + spacing),
        iterations=points,
    )
