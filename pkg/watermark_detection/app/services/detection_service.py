"""End-to-end detection: recompute keys, score the pivotals, compare to gamma_n.

The detector knows the salt and the window width, so it re-derives every
step's key from the prompt and the suspect tokens exactly as the victim's
generator did, then applies the rejection rule sum_t h(Y_t) >= gamma_n.
The comparison is inclusive; a -inf or NaN statistic never rejects.
"""

import logging
from collections.abc import Sequence

import numpy as np

from watermark_detection.app.schemas.calibration import (
    CalibrationRequest,
    ExponentReport,
    ThresholdSpec,
)
from watermark_detection.app.schemas.detection import DetectionReport, DetectionRequest
from watermark_detection.app.services.calibration_service import (
    build_score,
    calibrate,
    exponent_complete,
    exponent_sum,
    fixed_alpha_threshold,
    sum_threshold,
)
from watermark_detection.exceptions import ParameterError
from watermark_detection.watermark.keying import (
    WindowConfig,
    derive_seeds,
    green_masks,
    greenlist_keys,
    gumbel_keys,
    sequence_windows,
)
from watermark_detection.watermark.statistics import ScoreFunction, sum_scores_batch

logger = logging.getLogger(__name__)

KEY_BLOCK_ROWS = 4096  # windows whose (rows, m) key arrays are materialized at once


def recompute_pivotals(
    tokens: np.ndarray,
    prompts: Sequence[np.ndarray],
    salt: int,
    scheme: str,
    m: int,
    gamma: float = 0.5,
    window: WindowConfig | None = None,
    block_rows: int = KEY_BLOCK_ROWS,
) -> np.ndarray:
    """Pivotal values Y_t for texts of shape (R, n) with prompts (R, *), shape (R, n).

    Keys are expanded block_rows windows at a time, so memory stays at
    block_rows * m entries whatever the batch size.
    """
    window = window or WindowConfig()
    tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
    reps, n = tokens.shape
    windows = np.concatenate(
        [sequence_windows(prompts[r], tokens[r], window) for r in range(reps)]
    )
    seeds = derive_seeds(windows, salt)
    flat_tokens = tokens.reshape(-1)
    values = np.empty(flat_tokens.size, dtype=np.float64)
    step = max(1, block_rows)
    for start in range(0, flat_tokens.size, step):
        stop = min(start + step, flat_tokens.size)
        block = seeds[start:stop]
        rows = np.arange(stop - start)
        picked = flat_tokens[start:stop]
        if scheme == "gumbel":
            values[start:stop] = gumbel_keys(block, m)[rows, picked]
        else:
            values[start:stop] = green_masks(greenlist_keys(block, m, gamma), m)[rows, picked]
    return values.reshape(reps, n)


def decide(statistics: np.ndarray | float, gamma_n: float) -> np.ndarray | bool:
    """Reject iff statistic >= gamma_n (NaN never rejects)."""
    stat = np.asarray(statistics, dtype=np.float64)
    reject = np.greater_equal(stat, gamma_n) & ~np.isnan(stat)
    return bool(reject) if reject.ndim == 0 else reject


def calibration_request(req: DetectionRequest) -> CalibrationRequest:
    return CalibrationRequest(
        scheme=req.scheme,
        mode=req.mode,
        regime=req.regime,
        n=req.n,
        score="count" if req.scheme == "redgreen" else req.score,
        alpha=req.alpha,
        delta=req.delta,
        theta=req.theta,
        gamma=req.gamma,
        sum_scaling=req.sum_scaling,
    )


def resolve_threshold(request: CalibrationRequest, score: ScoreFunction) -> ThresholdSpec:
    """gamma_n for an already-built score.

    Gumbel scores carry their own delta and theta, so callers can hold one
    request and vary the score per text.
    """
    if request.scheme == "redgreen":
        return calibrate(request)
    if request.regime == "fixed_alpha":
        spec = fixed_alpha_threshold(score, request.n, request.alpha)
    else:
        delta = score.delta if score.delta is not None else request.delta
        if delta is None:
            raise ParameterError("the sum-of-errors threshold requires delta")
        theta = request.theta if request.mode == "partial" else None
        spec = sum_threshold(score, request.n, delta, theta, request.sum_scaling)
    return spec.model_copy(update={"mode": request.mode})


def detect_batch(
    tokens: np.ndarray,
    prompts: Sequence[np.ndarray],
    salt: int,
    request: CalibrationRequest,
    m: int,
    window: WindowConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, ThresholdSpec, np.ndarray]:
    """Detect on R sequences of equal length that share one threshold.

    Returns (statistics, reject flags, threshold, pivotals), arrays of
    shape (R,), (R,) and (R, n).
    """
    pivotals = recompute_pivotals(
        tokens, prompts, salt, request.scheme, m, request.gamma, window
    )
    score = build_score(request)
    statistics = sum_scores_batch(pivotals, score)
    threshold = resolve_threshold(request, score)
    return statistics, decide(statistics, threshold.gamma_n), threshold, pivotals


def _exponents(req: DetectionRequest, score: ScoreFunction) -> ExponentReport:
    partial_theta = req.theta if req.mode == "partial" else None
    r_report = exponent_complete(score, req.delta, partial_theta)
    s_report = exponent_sum(score, req.delta, partial_theta)
    return ExponentReport(
        score=score.name,
        delta=req.delta,
        theta=partial_theta,
        r_exponent=r_report.r_exponent,
        r_minimizer=r_report.r_minimizer,
        s_exponent=s_report.s_exponent,
        s_minimizer=s_report.s_minimizer,
    )


def detect(req: DetectionRequest) -> DetectionReport:
    """Run the test on one suspect sequence.

    Raises:
        ContractError: If the prompt cannot fill the first window and padding is off.
        ParameterError: If the parameters do not fit the scheme and mode.
    """
    window = WindowConfig(width=req.window_width, allow_padding=req.allow_padding)
    cal = calibration_request(req)
    statistics, reject, threshold, pivotals = detect_batch(
        np.asarray(req.tokens, dtype=np.int64)[None, :],
        [np.asarray(req.prompt, dtype=np.int64)],
        req.salt,
        cal,
        req.m,
        window,
    )
    statistic = float(statistics[0])

    exponents = None
    if req.with_exponents and req.scheme == "gumbel" and req.delta is not None:
        exponents = _exponents(req, build_score(cal))

    logger.info(
        f"Detection n={req.n} {req.scheme}/{req.mode}/{req.regime}: "
        f"statistic={statistic:.4f} threshold={threshold.gamma_n:.4f} reject={bool(reject[0])}"
    )
    return DetectionReport(
        n=req.n,
        statistic=statistic,
        threshold=threshold,
        reject=bool(reject[0]),
        pivotals=pivotals[0].tolist() if req.dump_pivotals else None,
        exponents=exponents,
    )
