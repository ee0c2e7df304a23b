"""Writes and reads error-curve CSV files and the per-rep delta trace."""

import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from watermark_detection.app.schemas.experiment import CurvePoint, ErrorCurve
from watermark_detection.exceptions import WatermarkError

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "scheme",
    "mode",
    "regime",
    "score",
    "theta",
    "n",
    "metric",
    "estimate",
    "stderr",
    "reps",
    "seed",
]
SORT_KEYS = ["scheme", "mode", "regime", "score", "theta", "n", "metric"]


def curves_to_frame(curves: list[ErrorCurve]) -> pd.DataFrame:
    """One row per curve point, in the canonical sort order."""
    rows = [
        {
            "scheme": curve.scheme,
            "mode": curve.mode,
            "regime": curve.regime,
            "score": curve.score,
            "theta": curve.theta,
            "n": point.n,
            "metric": point.metric,
            "estimate": point.estimate,
            "stderr": point.stderr,
            "reps": point.reps,
            "seed": curve.seed,
        }
        for curve in curves
        for point in curve.points
    ]
    df = pd.DataFrame(rows, columns=CSV_COLUMNS)
    df["theta"] = df["theta"].astype("float64")
    # Curves without a theta label sort first
    df = df.sort_values(SORT_KEYS, kind="mergesort", na_position="first")
    return df.reset_index(drop=True)


def emit_csv(curves: list[ErrorCurve], destination: Path | str) -> Path:
    """Write curves to CSV.

    Raises:
        WatermarkError: If curves is empty.
        OSError: If the file cannot be written; the message names the path.
    """
    if not curves or not any(curve.points for curve in curves):
        raise WatermarkError("no curve points to write")
    path = Path(destination)
    df = curves_to_frame(curves)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, lineterminator="\n")
    except OSError as exc:
        raise OSError(f"cannot write curves to {path}: {exc}") from exc
    logger.info(f"Wrote {len(df)} curve rows to {path}")
    return path


def _theta_label(value: float) -> float | None:
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else value


def parse_csv(source: Path | str) -> list[ErrorCurve]:
    """Read curves written by emit_csv, in file order."""
    path = Path(source)
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except OSError as exc:
        raise OSError(f"cannot read curves from {path}: {exc}") from exc
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise WatermarkError(f"{path} is missing columns: {', '.join(missing)}")

    curves: dict[tuple, ErrorCurve] = {}
    for row in df.itertuples(index=False):
        theta = _theta_label(float(row.theta))
        key = (row.scheme, row.mode, row.regime, row.score, theta, int(row.seed))
        curve = curves.get(key)
        if curve is None:
            curve = ErrorCurve(
                scheme=row.scheme,
                mode=row.mode,
                regime=row.regime,
                score=row.score,
                theta=theta,
                seed=int(row.seed),
            )
            curves[key] = curve
        curve.points.append(
            CurvePoint(
                n=int(row.n),
                metric=row.metric,
                estimate=float(row.estimate),
                stderr=float(row.stderr),
                reps=int(row.reps),
            )
        )
    return list(curves.values())


def summary_table(curves: list[ErrorCurve]) -> pd.DataFrame:
    """Estimates pivoted to one row per n and one column per (score, theta, metric)."""
    df = curves_to_frame(curves)
    df["curve"] = [
        f"{score}" + ("" if math.isnan(theta) else f"@{theta:g}") + f":{metric}"
        for score, theta, metric in zip(df["score"], df["theta"], df["metric"], strict=True)
    ]
    return df.pivot_table(index="n", columns="curve", values="estimate", sort=True)


def write_trace(deltas: np.ndarray, destination: Path | str) -> Path:
    """Per-rep generator delta as `rep,delta` rows."""
    path = Path(destination)
    df = pd.DataFrame({"rep": np.arange(len(deltas)), "delta": np.asarray(deltas, dtype=float)})
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, lineterminator="\n")
    except OSError as exc:
        raise OSError(f"cannot write delta trace to {path}: {exc}") from exc
    logger.info(f"Wrote delta trace for {len(df)} reps to {path}")
    return path
