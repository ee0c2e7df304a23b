"""Named experiment configs and YAML config loading.

paper-* presets use the published simulation settings: m = 1000, 5000 reps,
delta drawn from [0.001, 0.5] per text (complete) or fixed at 0.005
(partial), theta = 0.8, gamma = 0.5. desk-* presets scale them down to
m = 100, 1000 reps and n in {100, ..., 500} for quick acceptance runs.
"""

import logging
from pathlib import Path

import yaml

from watermark_detection.app.schemas.experiment import ExperimentConfig
from watermark_detection.exceptions import ParameterError

logger = logging.getLogger(__name__)

DESK = {"m": 100, "reps": 1000, "lengths": [100, 200, 300, 400, 500], "delta_grid": 0.01}

_SCENARIOS: dict[str, dict] = {
    "gumbel-complete": {"scheme": "gumbel", "mode": "complete", "regime": "fixed_alpha"},
    "gumbel-partial": {"scheme": "gumbel", "mode": "partial", "regime": "fixed_alpha"},
    "gumbel-complete-sum": {"scheme": "gumbel", "mode": "complete", "regime": "sum"},
    "gumbel-partial-sum": {"scheme": "gumbel", "mode": "partial", "regime": "sum"},
    "redgreen-complete": {"scheme": "redgreen", "mode": "complete", "regime": "fixed_alpha"},
    "redgreen-partial": {"scheme": "redgreen", "mode": "partial", "regime": "fixed_alpha"},
    "redgreen-complete-sum": {"scheme": "redgreen", "mode": "complete", "regime": "sum"},
    "redgreen-partial-sum": {"scheme": "redgreen", "mode": "partial", "regime": "sum"},
}

# Published figures, in the order the results are reported
_PAPER_FIGURES = {
    "paper-fig1": "gumbel-complete",
    "paper-fig2": "gumbel-partial",
    "paper-fig3-complete": "gumbel-complete-sum",
    "paper-fig3-partial": "gumbel-partial-sum",
    "paper-fig4-complete": "redgreen-complete",
    "paper-fig4-partial": "redgreen-partial",
    "paper-fig5-complete": "redgreen-complete-sum",
    "paper-fig5-partial": "redgreen-partial-sum",
}

PRESETS: dict[str, dict] = {
    **{name: {"name": name, **_SCENARIOS[s]} for name, s in _PAPER_FIGURES.items()},
    **{f"desk-{s}": {"name": f"desk-{s}", **_SCENARIOS[s], **DESK} for s in _SCENARIOS},
}


def list_presets() -> list[str]:
    return sorted(PRESETS)


def get_preset(name: str, **overrides) -> ExperimentConfig:
    """Build a preset config, optionally overriding fields.

    Raises:
        ParameterError: If the preset name is unknown.
    """
    if name not in PRESETS:
        raise ParameterError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return ExperimentConfig(**{**PRESETS[name], **overrides})


def load_config_file(path: Path | str) -> ExperimentConfig:
    """Parse a flat YAML config; a `preset` key starts from that preset.

    Raises:
        ParameterError: If the document is not a mapping or names an unknown preset.
        pydantic.ValidationError: On unknown keys or invalid values.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: experiment config must be a key-value mapping")
    preset = data.pop("preset", None)
    if preset is not None:
        return get_preset(preset, **data)
    logger.info(f"Loaded experiment config from {path}")
    return ExperimentConfig(**data)
