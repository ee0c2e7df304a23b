"""Threshold calibration and error exponents for both watermark schemes.

Gumbel scheme, for a score h and text length n:
1. Fixed-alpha: gamma_n = n E0[h] + z_{1-alpha} sqrt(n Var0[h]), with H0 moments
   computed by quadrature since Y ~ U(0, 1) under H0.
2. Sum of errors, optimal score: gamma_n = log(a*/(1 - a*)) where a* minimizes
   integral_0^1 f1(r)^a dr and f1 is the least-favorable H1 density of Y.
3. Sum of errors, baseline scores (or the n-scaled variant for the optimal
   score): gamma_n = n tau, tau the per-token threshold at which the H0 and
   H1 large-deviation rates of the statistic coincide.

Red-green scheme: the statistic is the green count, Binomial(n, gamma) under
H0, so thresholds are closed form.

Error exponents R (fixed alpha) and S (sum of errors) of any score are
evaluated at the least-favorable P* (complete) or (P*, Q*) (partial).
"""

import logging
import math
from collections.abc import Callable
from typing import NamedTuple

from scipy import stats

from watermark_detection.app.schemas.calibration import (
    CalibrationRequest,
    ExponentReport,
    ThresholdSpec,
)
from watermark_detection.app.services.cache_service import cached
from watermark_detection.exceptions import NumericalError, ParameterError
from watermark_detection.numerics.integrate import integrate_unit
from watermark_detection.numerics.optimize import MinimizeResult, expand_bracket, golden_section
from watermark_detection.watermark.statistics import ScoreFunction

logger = logging.getLogger(__name__)

SOLVER_TOL = 1e-8  # golden-section tolerance for threshold optima
RATE_TOL = 1e-7  # golden-section tolerance inside exponent evaluations
DESCENT_TOL = 1e-6  # coordinate-descent stopping rule for S
DESCENT_MAX_PASSES = 50
BISECTION_TOL = 1e-8
EXP_CAP = 700.0  # math.exp overflows just above 709


class SumThreshold(NamedTuple):
    """Sum-of-errors threshold of the optimal Gumbel score."""

    optimum: float  # alpha* (delta >= 1/2 or complete) or beta* (partial, delta < 1/2)
    gamma_n: float
    objective: float
    result: MinimizeResult


def _as_scalar(h: ScoreFunction | Callable) -> Callable[[float], float]:
    if isinstance(h, ScoreFunction):
        return h.as_scalar()
    return lambda r: float(h(r))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


def _check_n(n: int) -> None:
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")


def least_favorable_density(delta: float, theta: float | None = None) -> Callable[[float], float]:
    """H1 density of the Gumbel pivotal at P* (theta None) or at (P*, Q*)."""
    if theta is None:
        return ScoreFunction.opt_complete(delta).density_scalar()
    return ScoreFunction.opt_partial(delta, theta).density_scalar()


def _expect(f: Callable[[float], float], density: Callable[[float], float] | None = None) -> float:
    if density is None:
        return integrate_unit(f)
    return integrate_unit(lambda r: f(r) * density(r))


def _log_mgf(
    h: Callable[[float], float], s: float, density: Callable[[float], float] | None = None
) -> float:
    """log E[exp(s h(Y))] for Y with the given density on (0, 1) (uniform if None)."""

    def integrand(r: float) -> float:
        weight = 1.0 if density is None else density(r)
        if weight == 0.0:
            return 0.0
        x = s * h(r)
        if x > EXP_CAP:
            return math.inf
        return math.exp(x) * weight

    try:
        value = integrate_unit(integrand)
    except NumericalError:
        return math.inf
    return math.log(value) if value > 0 else -math.inf


# --- H0 moments and fixed-alpha thresholds ---------------------------------


@cached
def moments_h0(h: ScoreFunction | Callable) -> tuple[float, float]:
    """Mean and variance of h(Y) for Y ~ U(0, 1).

    Raises:
        NumericalError: If the quadrature does not converge.
    """
    f = _as_scalar(h)
    mean = integrate_unit(f)
    second = integrate_unit(lambda r: f(r) ** 2)
    return mean, max(second - mean**2, 0.0)


def fixed_alpha_threshold(h: ScoreFunction | Callable, n: int, alpha: float) -> ThresholdSpec:
    """gamma_n = n E0[h] + z_{1-alpha} sqrt(n Var0[h])."""
    _check_n(n)
    _check_alpha(alpha)
    mean, var = moments_h0(h)
    z = float(stats.norm.ppf(1.0 - alpha))
    gamma_n = n * mean + z * math.sqrt(n * var)
    name = h.name if isinstance(h, ScoreFunction) else "custom"
    return ThresholdSpec(
        scheme="gumbel",
        mode="partial" if getattr(h, "kind", "") == "opt_partial" else "complete",
        regime="fixed_alpha",
        score=name,
        n=n,
        gamma_n=gamma_n,
        alpha=alpha,
        delta=getattr(h, "delta", None),
        theta=getattr(h, "theta", None),
        diagnostics={"mean0": mean, "var0": var, "z": z},
    )


# --- sum-of-errors thresholds for the optimal Gumbel score ------------------


def _power_integral_minimum(density: Callable[[float], float]) -> MinimizeResult:
    """Minimize a -> integral_0^1 density(r)^a dr over (0, 1)."""

    def objective(a: float) -> float:
        return integrate_unit(lambda r: density(r) ** a)

    return golden_section(objective, 0.0, 1.0, tol=SOLVER_TOL)


def _log_odds(a: float) -> float:
    return math.log(a / (1.0 - a))


@cached
def sum_threshold_gumbel_complete(delta: float) -> SumThreshold:
    """alpha* minimizing integral (k r^(d/(1-d)) + r^(td/(1-td)))^a dr, and log(a*/(1-a*))."""
    result = _power_integral_minimum(least_favorable_density(delta))
    logger.debug(f"Complete sum threshold delta={delta}: alpha*={result.x:.8f}")
    return SumThreshold(result.x, _log_odds(result.x), result.fun, result)


@cached
def sum_threshold_gumbel_partial(delta: float, theta: float) -> SumThreshold:
    """alpha* (delta >= 1/2) or beta* (delta < 1/2) for the partial optimal score."""
    if not 0.5 < theta <= 1.0:
        raise ParameterError(f"theta must lie in (1/2, 1], got {theta}")
    result = _power_integral_minimum(least_favorable_density(delta, theta))
    if result.flat:
        logger.warning(f"Partial sum threshold is flat at delta={delta}, theta={theta}")
    return SumThreshold(result.x, _log_odds(result.x), result.fun, result)


# --- red-green thresholds ---------------------------------------------------


def rg_fixed_alpha_threshold(n: int, gamma: float, alpha: float) -> float:
    """gamma_n = n gamma + sqrt(n gamma (1 - gamma)) z_{1-alpha}."""
    _check_n(n)
    _check_alpha(alpha)
    return n * gamma + math.sqrt(n * gamma * (1.0 - gamma)) * float(stats.norm.ppf(1.0 - alpha))


def rg_sum_threshold(n: int, gamma: float, theta: float | None, mode: str) -> int:
    """Integer sum-of-errors threshold on the green count.

    Complete inheritance: n. Partial inheritance:
    ceil(n (log(1-gamma) - log(1-theta)) / (log theta + log(1-gamma) - log gamma - log(1-theta))),
    whose limit at theta = gamma is ceil(n gamma) and at theta = 1 is n.

    Raises:
        ParameterError: If theta is missing or below gamma in partial mode.
    """
    _check_n(n)
    if mode == "complete":
        return n
    if theta is None:
        raise ParameterError("partial red-green threshold requires theta")
    if theta < gamma:
        raise ParameterError(f"theta={theta} must be at least gamma={gamma}")
    if theta >= 1.0:
        return n
    if abs(theta - gamma) < 1e-9:
        ratio = gamma
    else:
        numerator = math.log(1.0 - gamma) - math.log(1.0 - theta)
        denominator = (
            math.log(theta) + math.log(1.0 - gamma) - math.log(gamma) - math.log(1.0 - theta)
        )
        ratio = numerator / denominator
    return math.ceil(n * ratio - 1e-9)


def rg_type2_theory(n: int, gamma: float, theta: float, alpha: float) -> float:
    """Normal-approximation type II error of the fixed-alpha red-green test.

    P(Z < sqrt(n)(gamma - theta)/sqrt(theta(1-theta))
          + sqrt(gamma(1-gamma)/(theta(1-theta))) z_{1-alpha}); 0 at theta = 1.
    """
    _check_n(n)
    _check_alpha(alpha)
    if theta >= 1.0:
        return 0.0
    scale = math.sqrt(theta * (1.0 - theta))
    z = float(stats.norm.ppf(1.0 - alpha))
    arg = math.sqrt(n) * (gamma - theta) / scale + math.sqrt(gamma * (1.0 - gamma)) / scale * z
    return float(stats.norm.cdf(arg))


def rg_exact_errors(n: int, gamma: float, theta: float, threshold: float) -> tuple[float, float]:
    """Exact (type I, type II) of the rule count >= threshold.

    The count is Binomial(n, gamma) under H0 and Binomial(n, theta) at the
    least-favorable H1 point.
    """
    _check_n(n)
    cut = math.ceil(threshold - 1e-12)
    type1 = float(stats.binom.sf(cut - 1, n, gamma))
    type2 = float(stats.binom.cdf(cut - 1, n, theta))
    return type1, type2


# --- error exponents --------------------------------------------------------


def _minimize_nonnegative(objective: Callable[[float], float], tol: float) -> MinimizeResult:
    """Minimize over s >= 0 on a geometrically expanded bracket."""
    lo, hi, shrunk = expand_bracket(objective, 0.0, 1.0)
    if shrunk:
        logger.debug(f"Exponent bracket shrunk to [{lo}, {hi:.4g}] by a divergent MGF")
    return golden_section(objective, lo, hi, tol=tol)


@cached
def exponent_complete(
    h: ScoreFunction | Callable, delta: float, theta: float | None = None
) -> ExponentReport:
    """Fixed-alpha exponent R = -inf_{s>=0} { s E0[h] + log E1[exp(-s h)] }.

    E1 is taken at the least-favorable point: P* when theta is None,
    (P*, Q*) otherwise.
    """
    f = _as_scalar(h)
    density = least_favorable_density(delta, theta)
    mean0 = integrate_unit(f)

    def objective(s: float) -> float:
        return s * mean0 + _log_mgf(f, -s, density)

    result = _minimize_nonnegative(objective, RATE_TOL)
    return ExponentReport(
        score=getattr(h, "name", "custom"),
        delta=delta,
        theta=theta,
        r_exponent=max(0.0, -result.fun),
        r_minimizer=result.x,
        diagnostics={"mean0": mean0, **result.diagnostics()},
    )


def sum_objective(
    h: Callable[[float], float],
    null_density: Callable[[float], float] | None,
    alt_density: Callable[[float], float] | None,
    theta1: float,
    theta2: float,
) -> float:
    """theta2/(theta1+theta2) log E0 e^{theta1 h} + theta1/(theta1+theta2) log E1 e^{-theta2 h}."""
    total = theta1 + theta2
    null_part = _log_mgf(h, theta1, null_density)
    alt_part = _log_mgf(h, -theta2, alt_density)
    if math.isinf(null_part) or math.isinf(alt_part):
        return math.inf
    return theta2 / total * null_part + theta1 / total * alt_part


@cached
def exponent_sum(
    h: ScoreFunction | Callable, delta: float, theta: float | None = None
) -> ExponentReport:
    """Sum-of-errors exponent S = -inf_{theta1, theta2 > 0} sum_objective.

    Coordinate descent over (theta1, theta2); each pass runs golden-section
    on a bracket expanded until the moment generating function diverges.
    """
    f = _as_scalar(h)
    density = least_favorable_density(delta, theta)

    def along_first(x: float) -> float:
        return sum_objective(f, None, density, x, t2)

    def along_second(x: float) -> float:
        return sum_objective(f, None, density, t1, x)

    t1, t2 = 1.0, 1.0
    current = sum_objective(f, None, density, t1, t2)
    previous = current
    passes = 0
    for passes in range(1, DESCENT_MAX_PASSES + 1):
        r1 = _minimize_nonnegative(along_first, RATE_TOL)
        if r1.fun < current:
            t1, current = r1.x, r1.fun
        r2 = _minimize_nonnegative(along_second, RATE_TOL)
        if r2.fun < current:
            t2, current = r2.x, r2.fun
        if math.isfinite(previous) and previous - current < DESCENT_TOL:
            break
        previous = current
    best = current
    if not math.isfinite(best):
        raise NumericalError(
            "sum-of-errors objective is infinite everywhere it was evaluated",
            {"delta": delta, "theta": theta},
        )
    return ExponentReport(
        score=getattr(h, "name", "custom"),
        delta=delta,
        theta=theta,
        s_exponent=max(0.0, -best),
        s_minimizer=(t1, t2),
        diagnostics={"passes": passes},
    )


# --- Chernoff-balanced per-token threshold ----------------------------------


@cached
def chernoff_threshold(
    h: ScoreFunction | Callable, delta: float, theta: float | None = None
) -> float:
    """Per-token tau where the H0 and H1 large-deviation rates of sum h(Y_t) meet.

    rate0(tau) = sup_{s>=0} [s tau - log E0 e^{s h}] grows from 0 at E0[h];
    rate1(tau) = sup_{s>=0} [-s tau - log E1 e^{-s h}] falls to 0 at E1[h].
    Bisection on rate0 - rate1 between the two means.
    """
    f = _as_scalar(h)
    density = least_favorable_density(delta, theta)
    mean0 = integrate_unit(f)
    mean1 = _expect(f, density)
    if not mean1 > mean0:
        raise NumericalError(
            "score does not separate H0 from H1", {"mean0": mean0, "mean1": mean1}
        )

    def rate0(tau: float) -> float:
        res = _minimize_nonnegative(lambda s: _log_mgf(f, s, None) - s * tau, RATE_TOL)
        return -res.fun

    def rate1(tau: float) -> float:
        res = _minimize_nonnegative(lambda s: _log_mgf(f, -s, density) + s * tau, RATE_TOL)
        return -res.fun

    lo, hi = mean0, mean1
    while hi - lo > BISECTION_TOL * (1.0 + abs(lo)):
        mid = 0.5 * (lo + hi)
        if rate0(mid) < rate1(mid):
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    logger.debug(f"Chernoff threshold tau={tau:.8f} (E0={mean0:.6f}, E1={mean1:.6f})")
    return tau


# --- request-level calibration ----------------------------------------------


def sum_threshold(
    h: ScoreFunction,
    n: int,
    delta: float,
    theta: float | None = None,
    scaling: str = "paper",
) -> ThresholdSpec:
    """Sum-of-errors gamma_n for a Gumbel score.

    The optimal score under "paper" scaling uses the n-free log(a*/(1-a*));
    every other case uses the Chernoff-balanced n tau.
    """
    _check_n(n)
    mode = "partial" if theta is not None else "complete"
    common = {
        "scheme": "gumbel",
        "mode": mode,
        "regime": "sum",
        "score": h.name,
        "n": n,
        "delta": delta,
        "theta": theta,
    }
    if h.name == "opt" and scaling == "paper":
        if theta is None:
            solved = sum_threshold_gumbel_complete(delta)
            label = "alpha_star"
        else:
            solved = sum_threshold_gumbel_partial(delta, theta)
            label = "alpha_star" if delta >= 0.5 else "beta_star"
        return ThresholdSpec(
            gamma_n=solved.gamma_n,
            optimum=solved.optimum,
            optimum_label=label,
            diagnostics={
                "objective": solved.objective,
                "flat": solved.result.flat,
                "bracket": solved.result.bracket,
            },
            **common,
        )

    tau = chernoff_threshold(h, delta, theta)
    return ThresholdSpec(
        gamma_n=n * tau,
        optimum=tau,
        optimum_label="tau",
        diagnostics={"scaling": "chernoff"},
        **common,
    )


def build_score(request: CalibrationRequest) -> ScoreFunction:
    """The score a request refers to (count for red-green)."""
    if request.scheme == "redgreen":
        return ScoreFunction.identity()
    return ScoreFunction.from_name(request.score, request.delta, request.theta, request.mode)


def calibrate(request: CalibrationRequest) -> ThresholdSpec:
    """Resolve gamma_n for a scheme, mode, regime and score."""
    common = {
        "scheme": request.scheme,
        "mode": request.mode,
        "regime": request.regime,
        "n": request.n,
        "delta": request.delta,
        "theta": request.theta,
    }

    if request.scheme == "redgreen":
        common.update(score="count", gamma=request.gamma)
        if request.regime == "fixed_alpha":
            gamma_n = rg_fixed_alpha_threshold(request.n, request.gamma, request.alpha)
            type2 = None
            if request.theta is not None:
                type2 = rg_type2_theory(request.n, request.gamma, request.theta, request.alpha)
            return ThresholdSpec(
                gamma_n=gamma_n,
                alpha=request.alpha,
                diagnostics={"type2_theory": type2} if type2 is not None else {},
                **common,
            )
        gamma_n = rg_sum_threshold(request.n, request.gamma, request.theta, request.mode)
        type1, type2 = rg_exact_errors(
            request.n, request.gamma, request.theta or 1.0, gamma_n
        )
        return ThresholdSpec(
            gamma_n=gamma_n,
            diagnostics={"exact_type1": type1, "exact_type2": type2},
            **common,
        )

    score = build_score(request)
    common["score"] = score.name
    if request.regime == "fixed_alpha":
        spec = fixed_alpha_threshold(score, request.n, request.alpha)
        return spec.model_copy(update=common)

    partial_theta = request.theta if request.mode == "partial" else None
    spec = sum_threshold(score, request.n, request.delta, partial_theta, request.sum_scaling)
    return spec.model_copy(update=common)
