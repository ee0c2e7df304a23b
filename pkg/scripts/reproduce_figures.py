"""Run every experiment preset of one family and write its error curves.

Usage:
    python -m scripts.reproduce_figures            # desk-* presets
    python -m scripts.reproduce_figures paper      # full-scale paper-* presets

This script:
1. Selects the presets of the requested family
2. Runs each experiment (type I / type II or sum of errors vs text length)
3. Writes one CSV per preset and a per-rep delta trace into WMD_OUTPUT_DIR
4. Logs a one-line summary per curve
"""

import logging
import sys
import time
from pathlib import Path

from watermark_detection.app.config import settings
from watermark_detection.pipeline.loaders.csv_loader import emit_csv
from watermark_detection.pipeline.orchestrator import run_experiment
from watermark_detection.pipeline.presets import get_preset, list_presets

logging.basicConfig(
    level=settings.log_level,
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


def main(family: str = "desk") -> int:
    names = [name for name in list_presets() if name.startswith(f"{family}-")]
    if not names:
        logger.error(f"No presets in family {family!r}")
        return 2

    output_dir = Path(settings.output_dir)
    logger.info(f"=== Reproducing {len(names)} {family} experiments into {output_dir} ===")

    for step, name in enumerate(names, start=1):
        logger.info(f"Step {step}/{len(names)}: {name}")
        started = time.perf_counter()
        try:
            config = get_preset(name)
            curves = run_experiment(
                config, workers=settings.workers, trace_path=output_dir / f"{name}-trace.csv"
            )
            emit_csv(curves, output_dir / f"{name}.csv")
        except Exception:
            logger.error(f"Experiment {name} failed", exc_info=True)
            continue

        for curve in curves:
            final = max(p.n for p in curve.points)
            values = ", ".join(
                f"{p.metric}={p.estimate:.4f}" for p in curve.points if p.n == final
            )
            theta = "" if curve.theta is None else f" theta={curve.theta:g}"
            logger.info(f"  {curve.score}{theta} at n={final}: {values}")
        logger.info(f"  finished in {time.perf_counter() - started:.1f}s")

    logger.info("=== Done ===")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1] if len(sys.argv) > 1 else "desk"))
