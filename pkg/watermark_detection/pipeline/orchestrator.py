"""Monte Carlo harness: error rates against text length.

For every text length n of an experiment:
1. Each rep gets its context from its own seed stream: the generator's
   delta (fixed or drawn from an interval) and a pseudorandom prompt.
2. H0 texts (uniform tokens, keys ignored) and H1 texts (the scheme's
   watermarked or partially inherited sampler) are simulated in chunks of
   settings.chunk_size reps, distributed with joblib.
3. Every text is scored with each requested score and compared with the
   calibrated threshold; Gumbel thresholds are resolved once per distinct
   detector delta and reused through the calibration cache.
4. Rejection counts become error estimates with binomial standard errors.

Chunk boundaries depend only on chunk_size and every rep draws from a
SeedSequence keyed by (rep, hypothesis, n), so estimates do not depend on
the number of workers.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from watermark_detection.app.config import settings
from watermark_detection.app.schemas.calibration import CalibrationRequest
from watermark_detection.app.schemas.experiment import CurvePoint, ErrorCurve, ExperimentConfig
from watermark_detection.app.services.calibration_service import (
    build_score,
    rg_fixed_alpha_threshold,
    rg_sum_threshold,
    rg_type2_theory,
)
from watermark_detection.app.services.detection_service import decide, resolve_threshold
from watermark_detection.pipeline.loaders.csv_loader import write_trace
from watermark_detection.watermark.generation import generate_batch
from watermark_detection.watermark.keying import WindowConfig
from watermark_detection.watermark.statistics import sum_scores_batch

logger = logging.getLogger(__name__)

H0 = 0
H1 = 1

CurveKey = tuple[str, float | None]  # (score, theta label)


@dataclass
class RepContexts:
    """Per-rep generator delta and prompt, shared by every n and both hypotheses."""

    deltas: np.ndarray  # (reps,)
    prompts: np.ndarray  # (reps, window_width)


def rep_contexts(config: ExperimentConfig) -> RepContexts:
    """Draw each rep's delta and prompt from SeedSequence(seed, spawn_key=(rep,))."""
    generator_delta = config.generator_delta
    deltas = np.empty(config.reps, dtype=np.float64)
    prompts = np.empty((config.reps, config.window_width), dtype=np.int64)
    for rep in range(config.reps):
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(rep,)))
        u = rng.random()
        if isinstance(generator_delta, tuple):
            lo, hi = generator_delta
            deltas[rep] = lo + (hi - lo) * u
        else:
            deltas[rep] = generator_delta
        prompts[rep] = rng.integers(0, config.m, size=config.window_width)
    return RepContexts(deltas=deltas, prompts=prompts)


def detector_deltas(config: ExperimentConfig, contexts: RepContexts) -> np.ndarray:
    """The delta the detector plugs into the optimal score for each rep.

    "oracle" reuses the rep's generating delta snapped to config.delta_grid;
    a float fixes it for every rep.
    """
    if not isinstance(config.score_delta, str):
        return np.full(config.reps, float(config.score_delta))
    grid = config.delta_grid
    snapped = np.clip(np.round(contexts.deltas / grid) * grid, grid, 1.0 - grid)
    return np.round(snapped, 12)


def _noise(seed: int, rep: int, hypothesis: int, n: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, hypothesis, n)))


def _simulate_chunk(
    config: ExperimentConfig,
    hypothesis: int,
    n: int,
    start: int,
    stop: int,
    contexts: RepContexts,
) -> np.ndarray:
    """Pivotal values of reps start..stop-1, shape (stop - start, n)."""
    noises = [_noise(config.seed, rep, hypothesis, n) for rep in range(start, stop)]
    if hypothesis == H0:
        mode, policy = "null", "uniform"
    else:
        mode, policy = config.mode, config.policy
    batch = generate_batch(
        scheme=config.scheme,
        mode=mode,
        n=n,
        m=config.m,
        salt=config.salt,
        noises=noises,
        deltas=contexts.deltas[start:stop],
        prompts=contexts.prompts[start:stop],
        theta=config.theta,
        gamma=config.gamma,
        ntp_policy=policy,
        window=WindowConfig(width=config.window_width),
    )
    return batch.pivotals


def simulate_pivotals(
    config: ExperimentConfig,
    hypothesis: int,
    n: int,
    contexts: RepContexts,
    workers: int | None = None,
) -> np.ndarray:
    """Pivotal values of all reps for one hypothesis and length, shape (reps, n)."""
    chunk = settings.chunk_size
    bounds = [(s, min(s + chunk, config.reps)) for s in range(0, config.reps, chunk)]
    parts = Parallel(n_jobs=workers or settings.workers)(
        delayed(_simulate_chunk)(config, hypothesis, n, start, stop, contexts)
        for start, stop in bounds
    )
    return np.concatenate(parts, axis=0)


# --- decisions ----------------------------------------------------------------


def _gumbel_decisions(
    config: ExperimentConfig, n: int, pivotals: np.ndarray, deltas: np.ndarray
) -> dict[CurveKey, np.ndarray]:
    """Reject flags per score; scores and thresholds are grouped by detector delta."""
    theta = config.theta if config.mode == "partial" else None
    decisions: dict[CurveKey, np.ndarray] = {}
    for name in config.scores:
        reject = np.zeros(config.reps, dtype=bool)
        for delta in np.unique(deltas):
            rows = deltas == delta
            request = CalibrationRequest(
                scheme="gumbel",
                mode=config.mode,
                regime=config.regime,
                n=n,
                score=name,
                alpha=config.alpha,
                delta=float(delta),
                theta=theta,
                sum_scaling=config.sum_scaling,
            )
            score = build_score(request)
            threshold = resolve_threshold(request, score)
            reject[rows] = decide(sum_scores_batch(pivotals[rows], score), threshold.gamma_n)
        decisions[(name, config.label_theta)] = reject
    return decisions


def _redgreen_thresholds(config: ExperimentConfig, n: int) -> dict[CurveKey, float]:
    if config.regime == "fixed_alpha":
        gamma_n = rg_fixed_alpha_threshold(n, config.gamma, config.alpha)
        return {("count", config.label_theta): gamma_n}
    if config.mode == "complete":
        return {("count", None): float(rg_sum_threshold(n, config.gamma, None, "complete"))}
    return {
        ("count", theta): float(rg_sum_threshold(n, config.gamma, theta, "partial"))
        for theta in config.theta_sweep
    }


def decisions_for(
    config: ExperimentConfig, n: int, pivotals: np.ndarray, deltas: np.ndarray
) -> dict[CurveKey, np.ndarray]:
    """Reject flags of every rep for each curve the experiment reports."""
    if config.scheme == "gumbel":
        return _gumbel_decisions(config, n, pivotals, deltas)
    counts = pivotals.sum(axis=1)
    thresholds = _redgreen_thresholds(config, n)
    return {key: decide(counts, gamma_n) for key, gamma_n in thresholds.items()}


# --- curves -------------------------------------------------------------------


def _binomial_point(n: int, metric: str, errors: int, reps: int) -> CurvePoint:
    p = errors / reps
    stderr = math.sqrt(p * (1.0 - p) / reps)
    return CurvePoint(n=n, metric=metric, estimate=p, stderr=stderr, reps=reps)


def _curves(
    config: ExperimentConfig, points: dict[CurveKey, list[CurvePoint]]
) -> list[ErrorCurve]:
    return [
        ErrorCurve(
            scheme=config.scheme,
            mode=config.mode,
            regime=config.regime,
            score=score,
            theta=theta,
            seed=config.seed,
            points=pts,
        )
        for (score, theta), pts in points.items()
    ]


def _error_counts(
    config: ExperimentConfig,
    hypothesis: int,
    contexts: RepContexts,
    workers: int | None,
) -> dict[int, dict[CurveKey, int]]:
    """n -> curve -> number of errors (rejections under H0, retentions under H1)."""
    deltas = detector_deltas(config, contexts)
    label = "H0" if hypothesis == H0 else "H1"
    counts: dict[int, dict[CurveKey, int]] = {}
    for n in config.lengths:
        logger.info(f"[{config.name}] simulating {config.reps} {label} texts at n={n}")
        pivotals = simulate_pivotals(config, hypothesis, n, contexts, workers)
        decisions = decisions_for(config, n, pivotals, deltas)
        if hypothesis == H0:
            counts[n] = {key: int(reject.sum()) for key, reject in decisions.items()}
        else:
            counts[n] = {key: int((~reject).sum()) for key, reject in decisions.items()}
    return counts


def run_type1(config: ExperimentConfig, workers: int | None = None) -> list[ErrorCurve]:
    """Type I error against n, one curve per score (per threshold theta for red-green sweeps)."""
    contexts = rep_contexts(config)
    counts = _error_counts(config, H0, contexts, workers)
    points: dict[CurveKey, list[CurvePoint]] = {}
    for n, by_key in counts.items():
        for key, errors in by_key.items():
            points.setdefault(key, []).append(_binomial_point(n, "type1", errors, config.reps))
    return _curves(config, points)


def run_type2(config: ExperimentConfig, workers: int | None = None) -> list[ErrorCurve]:
    """Type II error against n; red-green fixed-alpha curves also carry type2_theory rows."""
    contexts = rep_contexts(config)
    counts = _error_counts(config, H1, contexts, workers)
    points: dict[CurveKey, list[CurvePoint]] = {}
    for n, by_key in counts.items():
        for key, errors in by_key.items():
            pts = points.setdefault(key, [])
            pts.append(_binomial_point(n, "type2", errors, config.reps))
            if config.scheme == "redgreen" and config.regime == "fixed_alpha":
                true_theta = config.theta if config.mode == "partial" else 1.0
                theory = rg_type2_theory(n, config.gamma, true_theta, config.alpha)
                pts.append(
                    CurvePoint(
                        n=n, metric="type2_theory", estimate=theory, stderr=0.0, reps=config.reps
                    )
                )
    return _curves(config, points)


def run_sum(config: ExperimentConfig, workers: int | None = None) -> list[ErrorCurve]:
    """Type I, type II and their sum against n from independent H0 and H1 batches.

    The standard error of the sum is sqrt(se1^2 + se2^2).
    """
    contexts = rep_contexts(config)
    null_counts = _error_counts(config, H0, contexts, workers)
    alt_counts = _error_counts(config, H1, contexts, workers)
    points: dict[CurveKey, list[CurvePoint]] = {}
    for n in config.lengths:
        for key, type1_errors in null_counts[n].items():
            first = _binomial_point(n, "type1", type1_errors, config.reps)
            second = _binomial_point(n, "type2", alt_counts[n][key], config.reps)
            total = CurvePoint(
                n=n,
                metric="type1+type2",
                estimate=first.estimate + second.estimate,
                stderr=math.sqrt(first.stderr**2 + second.stderr**2),
                reps=config.reps,
            )
            points.setdefault(key, []).extend([first, second, total])
    return _curves(config, points)


def _merge(*groups: list[ErrorCurve]) -> list[ErrorCurve]:
    merged: dict[CurveKey, ErrorCurve] = {}
    for curves in groups:
        for curve in curves:
            key = (curve.score, curve.theta)
            if key in merged:
                merged[key].points.extend(curve.points)
            else:
                merged[key] = curve
    return list(merged.values())


def run_experiment(
    config: ExperimentConfig,
    workers: int | None = None,
    trace_path: Path | str | None = None,
) -> list[ErrorCurve]:
    """Run the experiment its regime calls for.

    fixed_alpha: type I and type II curves (plus type2_theory for red-green).
    sum: type I, type II and their sum.
    """
    logger.info(
        f"Experiment {config.name}: {config.scheme}/{config.mode}/{config.regime}, "
        f"m={config.m}, reps={config.reps}, lengths={config.lengths}"
    )
    if trace_path is not None:
        write_trace(rep_contexts(config).deltas, trace_path)

    if config.regime == "sum":
        curves = run_sum(config, workers)
    else:
        curves = _merge(run_type1(config, workers), run_type2(config, workers))
    logger.info(f"Experiment {config.name} finished with {len(curves)} curves")
    return curves
