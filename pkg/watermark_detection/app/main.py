"""Command-line entry point: calibrate, generate, detect and experiment.

Usage:
    wmdetect calibrate --scheme redgreen --mode partial --regime sum --n 100 --theta 0.8
    wmdetect generate --scheme gumbel --mode complete --n 200 --seed 7 --output text.tok
    wmdetect detect text.tok --score opt --delta 0.3
    wmdetect experiment --preset desk-gumbel-complete --workers 4

Exit codes: 0 on success (a detect decision is printed, not signalled),
1 on runtime errors, 2 on usage and parameter errors.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from watermark_detection import __version__
from watermark_detection.app.config import settings
from watermark_detection.app.schemas.calibration import CalibrationRequest
from watermark_detection.app.schemas.detection import DetectionRequest
from watermark_detection.app.services.calibration_service import (
    build_score,
    calibrate,
    exponent_complete,
    exponent_sum,
)
from watermark_detection.app.services.detection_service import detect
from watermark_detection.exceptions import ParameterError, WatermarkError
from watermark_detection.pipeline.loaders.csv_loader import emit_csv, summary_table
from watermark_detection.pipeline.loaders.token_file import (
    parse_int,
    read_token_file,
    write_token_file,
)
from watermark_detection.pipeline.orchestrator import run_experiment
from watermark_detection.pipeline.presets import get_preset, list_presets, load_config_file
from watermark_detection.watermark.core import DistributionClassParams
from watermark_detection.watermark.generation import ScenarioSpec, generate_sequence

logger = logging.getLogger(__name__)

SCHEMES = ("gumbel", "redgreen")
REGIMES = ("fixed_alpha", "sum")
SCORES = ("opt", "ars", "log", "count")


def _fmt(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _print_block(title: str, row: dict) -> None:
    print(title)
    for key, value in row.items():
        if value is not None:
            print(f"  {key}: {_fmt(value)}")


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--score", choices=SCORES, default=None,
                   help="score function h (default: opt for gumbel, count for redgreen)")
    p.add_argument("--regime", choices=REGIMES, default="fixed_alpha",
                   help="fixed type I error level or minimal sum of errors")
    p.add_argument("--alpha", type=float, default=0.05, help="type I error level")
    p.add_argument("--delta", type=float, default=None, help="NTP class parameter delta")
    p.add_argument("--theta", type=float, default=None, help="inheritance level theta")
    p.add_argument("--gamma", type=float, default=None,
                   help="green-list fraction (default 0.5)")
    p.add_argument("--sum-scaling", choices=("paper", "chernoff"), default="paper",
                   help="sum-of-errors threshold for the optimal Gumbel score: "
                        "n-free log-odds (paper) or n times the Chernoff-balanced tau")
    p.add_argument("--exponents", action="store_true",
                   help="also report the error exponents R and S (Gumbel, needs --delta)")


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmdetect",
        description="Detect misappropriated watermarked text with optimal score tests.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None,
                        help=f"logging level (default {settings.log_level}, env WMD_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="resolve the rejection threshold gamma_n")
    cal.add_argument("--scheme", choices=SCHEMES, default="gumbel")
    cal.add_argument("--mode", choices=("complete", "partial"), default="complete",
                     help="inheritance assumption")
    cal.add_argument("--n", type=int, required=True, help="text length")
    cal.add_argument("--csv", type=Path, default=None, help="also write the threshold as a CSV row")
    _add_threshold_flags(cal)

    gen = sub.add_parser("generate", help="simulate a token sequence and write a token file")
    gen.add_argument("--scheme", choices=SCHEMES, default="gumbel")
    gen.add_argument("--mode", choices=("null", "complete", "partial"), default="complete",
                     help="null: unwatermarked; complete/partial: inherited watermark")
    gen.add_argument("--n", type=int, default=200, help="number of tokens")
    gen.add_argument("--m", type=int, default=1000, help="vocabulary size")
    gen.add_argument("--delta", type=float, default=0.3, help="spike NTP parameter delta")
    gen.add_argument("--theta", type=float, default=None,
                     help="inheritance level (partial mode, default 0.8)")
    gen.add_argument("--gamma", type=float, default=0.5, help="green-list fraction")
    gen.add_argument("--ntp-policy", choices=("spike", "uniform", "dirichlet"), default=None,
                     help="NTP policy (default: uniform for null, spike for gumbel, "
                          "dirichlet for redgreen)")
    gen.add_argument("--seed", type=int, default=0, help="noise and prompt seed")
    gen.add_argument("--salt", type=parse_int, default=None,
                     help="watermark key salt (default WMD_DEFAULT_SALT)")
    gen.add_argument("--prompt", type=int, nargs="*", default=None,
                     help="prompt tokens (default: window-width tokens drawn from the seed)")
    gen.add_argument("--window-width", type=int, default=5, help="key window width")
    gen.add_argument("--output", type=Path, required=True, help="token file to write")

    det = sub.add_parser("detect", help="test a token file for the watermark")
    det.add_argument("token_file", type=Path, help="file written by `generate` or by hand")
    det.add_argument("--scheme", choices=SCHEMES, default=None,
                     help="default: the file header, else gumbel")
    det.add_argument("--mode", choices=("complete", "partial"), default=None,
                     help="inheritance assumption (default: header mode, else complete)")
    det.add_argument("--m", type=int, default=None, help="vocabulary size (default: header)")
    det.add_argument("--salt", type=parse_int, default=None,
                     help="watermark key salt (default: header, else WMD_DEFAULT_SALT)")
    det.add_argument("--window-width", type=int, default=None, help="key window width")
    det.add_argument("--no-padding", action="store_true",
                     help="reject prompts shorter than the window instead of padding")
    det.add_argument("--dump-pivotals", type=Path, default=None,
                     help="write the per-token pivotal values to this CSV")
    _add_threshold_flags(det)

    exp = sub.add_parser("experiment", help="run a Monte Carlo error-curve experiment")
    source = exp.add_mutually_exclusive_group()
    source.add_argument("--preset", default=None, help="named config (see --list-presets)")
    source.add_argument("--config", type=Path, default=None, help="YAML experiment config")
    exp.add_argument("--list-presets", action="store_true", help="print preset names and exit")
    exp.add_argument("--workers", type=int, default=None,
                     help="joblib workers (default WMD_WORKERS)")
    exp.add_argument("--seed", type=int, default=None, help="override the master seed")
    exp.add_argument("--reps", type=int, default=None, help="override the number of reps")
    exp.add_argument("--output", type=Path, default=None,
                     help="CSV destination (default <WMD_OUTPUT_DIR>/<name>.csv)")
    exp.add_argument("--trace", type=Path, default=None, help="write the per-rep delta trace")
    return parser


# --- subcommands --------------------------------------------------------------


def cmd_calibrate(args: argparse.Namespace) -> int:
    score = args.score or ("count" if args.scheme == "redgreen" else "opt")
    request = CalibrationRequest(
        scheme=args.scheme,
        mode=args.mode,
        regime=args.regime,
        n=args.n,
        score=score,
        alpha=args.alpha,
        delta=args.delta,
        theta=args.theta,
        gamma=args.gamma if args.gamma is not None else 0.5,
        sum_scaling=args.sum_scaling,
    )
    spec = calibrate(request)
    row = spec.as_row()
    _print_block("threshold", row)

    if args.exponents:
        if args.scheme != "gumbel" or args.delta is None:
            raise ParameterError("--exponents needs --scheme gumbel and --delta")
        h = build_score(request)
        theta = args.theta if args.mode == "partial" else None
        r = exponent_complete(h, args.delta, theta)
        s = exponent_sum(h, args.delta, theta)
        _print_block("exponents", {"R": r.r_exponent, "s_R": r.r_minimizer, "S": s.s_exponent})

    if args.csv is not None:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame([row]).to_csv(args.csv, index=False, lineterminator="\n")
        logger.info(f"Wrote threshold row to {args.csv}")
    return 0


def _generator_prompt(args: argparse.Namespace) -> list[int]:
    if args.prompt is not None:
        return list(args.prompt)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(0,)))
    return rng.integers(0, args.m, size=args.window_width).tolist()


def cmd_generate(args: argparse.Namespace) -> int:
    salt = args.salt if args.salt is not None else settings.default_salt
    theta = args.theta
    if args.mode == "partial" and theta is None:
        theta = 0.8
    policy = args.ntp_policy
    if policy is None:
        policy = "uniform" if args.mode == "null" else (
            "spike" if args.scheme == "gumbel" else "dirichlet"
        )
    prompt = _generator_prompt(args)
    spec = ScenarioSpec(
        scheme=args.scheme,
        mode=args.mode,
        params=DistributionClassParams(delta=args.delta, theta=theta, gamma=args.gamma),
        ntp_policy=policy,
        n=args.n,
        m=args.m,
        prompt=tuple(prompt),
        window_width=args.window_width,
    )
    noise = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(1,)))
    text = generate_sequence(spec, salt, noise)
    metadata = {
        "salt": salt,
        "scheme": args.scheme,
        "mode": args.mode,
        "seed": args.seed,
        "m": args.m,
        "n": args.n,
        "prompt": prompt,
        "delta": args.delta,
        "theta": theta,
        "gamma": args.gamma,
        "ntp_policy": policy,
        "window_width": args.window_width,
    }
    path = write_token_file(args.output, text.tokens, metadata)
    print(f"wrote {text.n} tokens to {path}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    token_file = read_token_file(args.token_file)
    header = token_file.metadata
    scheme = args.scheme or header.get("scheme", "gumbel")
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r} in {args.token_file}")
    mode = args.mode or header.get("mode", "complete")
    if mode == "null":
        mode = "complete"
    score = args.score or ("count" if scheme == "redgreen" else "opt")
    theta = args.theta
    if theta is None and mode == "partial":
        theta = token_file.get_float("theta")
    delta = args.delta
    if delta is None and scheme == "gumbel":
        delta = token_file.get_float("delta")
    gamma = args.gamma if args.gamma is not None else token_file.get_float("gamma", 0.5)
    m = args.m if args.m is not None else token_file.get_int("m", 1000)
    width = args.window_width or token_file.get_int("window_width", 5)
    salt = args.salt
    if salt is None:
        salt = token_file.get_int("salt", settings.default_salt)

    request = DetectionRequest(
        tokens=token_file.tokens,
        prompt=token_file.prompt,
        salt=salt,
        scheme=scheme,
        mode=mode,
        score=score,
        regime=args.regime,
        alpha=args.alpha,
        delta=delta,
        theta=theta,
        gamma=gamma,
        m=m,
        window_width=width,
        allow_padding=not args.no_padding,
        sum_scaling=args.sum_scaling,
        dump_pivotals=args.dump_pivotals is not None,
        with_exponents=args.exponents,
    )
    report = detect(request)
    _print_block("detection", report.as_row())
    if report.exponents is not None:
        _print_block(
            "exponents",
            {"R": report.exponents.r_exponent, "S": report.exponents.s_exponent},
        )

    if args.dump_pivotals is not None:
        args.dump_pivotals.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(
            {"t": np.arange(1, report.n + 1), "token": request.tokens, "pivotal": report.pivotals}
        ).to_csv(args.dump_pivotals, index=False, lineterminator="\n")
        logger.info(f"Wrote pivotal values to {args.dump_pivotals}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    if args.list_presets:
        for name in list_presets():
            print(name)
        return 0
    overrides = {k: v for k, v in (("seed", args.seed), ("reps", args.reps)) if v is not None}
    if args.config is not None:
        config = load_config_file(args.config)
        if overrides:
            config = config.model_validate({**config.model_dump(), **overrides})
    elif args.preset is not None:
        config = get_preset(args.preset, **overrides)
    else:
        raise ParameterError("experiment needs --preset or --config")

    curves = run_experiment(config, workers=args.workers, trace_path=args.trace)
    output = args.output or Path(settings.output_dir) / f"{config.name}.csv"
    path = emit_csv(curves, output)
    print(summary_table(curves).to_string(float_format=lambda x: f"{x:.4f}"))
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "calibrate": cmd_calibrate,
    "generate": cmd_generate,
    "detect": cmd_detect,
    "experiment": cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except (ParameterError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WatermarkError, OSError) as exc:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
