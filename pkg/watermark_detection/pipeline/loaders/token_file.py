"""Token files: a `# key: value` metadata header followed by one decimal token per line."""

import logging
from dataclasses import dataclass, field
from pathlib import Path

from watermark_detection.exceptions import ContractError

logger = logging.getLogger(__name__)

INT_FIELDS = ("salt", "seed", "m", "n", "window_width")
FLOAT_FIELDS = ("delta", "theta", "gamma")


def parse_int(value: str) -> int:
    """Decimal, or hexadecimal with a 0x prefix; leading zeros stay decimal."""
    text = value.strip()
    if text.lstrip("+-")[:2].lower() == "0x":
        return int(text, 16)
    return int(text)


@dataclass
class TokenFile:
    tokens: list[int]
    metadata: dict[str, str] = field(default_factory=dict)

    def get_int(self, key: str, default: int | None = None) -> int | None:
        value = self.metadata.get(key)
        return default if value in (None, "", "None") else parse_int(value)

    def get_float(self, key: str, default: float | None = None) -> float | None:
        value = self.metadata.get(key)
        return default if value in (None, "", "None") else float(value)

    @property
    def prompt(self) -> list[int]:
        return [int(tok) for tok in self.metadata.get("prompt", "").split()]


def _format_value(value) -> str:
    if isinstance(value, list | tuple):
        return " ".join(str(int(v)) for v in value)
    return str(value)


def write_token_file(
    path: Path | str, tokens, metadata: dict[str, object] | None = None
) -> Path:
    """Write tokens with their metadata header; the file is byte-stable for equal inputs."""
    path = Path(path)
    lines = [f"# {key}: {_format_value(value)}" for key, value in (metadata or {}).items()]
    lines.extend(str(int(tok)) for tok in tokens)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write token file {path}: {exc}") from exc
    logger.info(f"Wrote {len(lines) - len(metadata or {})} tokens to {path}")
    return path


def read_token_file(path: Path | str) -> TokenFile:
    """Parse a token file.

    Raises:
        ContractError: On a malformed line, naming its line number.
        OSError: If the file cannot be read.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read token file {path}: {exc}") from exc

    tokens: list[int] = []
    metadata: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" not in body:
                continue  # free-form comment
            key, _, value = body.partition(":")
            metadata[key.strip()] = value.strip()
            continue
        try:
            tokens.append(int(line))
        except ValueError:
            raise ContractError(
                f"{path}:{lineno}: expected an integer token, got {line!r}"
            ) from None
        if tokens[-1] < 0:
            raise ContractError(f"{path}:{lineno}: negative token {tokens[-1]}")

    for key in INT_FIELDS:
        if key in metadata and metadata[key] not in ("", "None"):
            try:
                parse_int(metadata[key])
            except ValueError:
                raise ContractError(f"{path}: metadata {key!r} is not an integer") from None
    for key in FLOAT_FIELDS:
        if key in metadata and metadata[key] not in ("", "None"):
            try:
                float(metadata[key])
            except ValueError:
                raise ContractError(f"{path}: metadata {key!r} is not a number") from None
    if not tokens:
        raise ContractError(f"{path}: no tokens found")
    return TokenFile(tokens=tokens, metadata=metadata)
