"""Adaptive quadrature on [0, 1] for score moments and calibration objectives.

Wraps scipy.integrate.quad (QUADPACK Gauss-Kronrod). Integrands here often
have a log singularity at an endpoint or, for small delta, a boundary layer
r^(1/delta) near r = 1, so every integral is split at REFINE_POINT and
integrated with a tight absolute tolerance.
"""

import logging
import math
import warnings
from collections.abc import Callable

from scipy import integrate
from scipy.integrate import IntegrationWarning

from watermark_detection.exceptions import NumericalError

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 400  # max subintervals
REFINE_POINT = 0.9  # start of the refinement band [0.9, 1]
ACCEPT_ABSERR = 1e-7  # error estimate tolerated when QUADPACK warns


def integrate_unit(
    f: Callable[[float], float],
    a: float = 0.0,
    b: float = 1.0,
    epsabs: float = QUAD_EPSABS,
    epsrel: float = QUAD_EPSREL,
) -> float:
    """Integral of f over (a, b) with a breakpoint at the refinement band.

    Raises:
        NumericalError: If the result is non-finite or QUADPACK reports a
            failure with an error estimate above ACCEPT_ABSERR.
    """
    points = [REFINE_POINT] if a < REFINE_POINT < b else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, abserr = integrate.quad(
            f, a, b, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT, points=points
        )
    failures = [str(w.message) for w in caught if issubclass(w.category, IntegrationWarning)]

    if not math.isfinite(value):
        raise NumericalError(
            "integral is not finite", {"a": a, "b": b, "value": value, "abserr": abserr}
        )
    if failures and abserr > max(ACCEPT_ABSERR, ACCEPT_ABSERR * abs(value)):
        raise NumericalError(
            "quadrature did not converge",
            {"a": a, "b": b, "value": value, "abserr": abserr, "message": failures[0][:120]},
        )
    if failures:
        logger.debug(f"Quadrature warning accepted (abserr={abserr:.2e}): {failures[0][:80]}")
    return float(value)
