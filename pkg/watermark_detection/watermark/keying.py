"""Per-step secret keys derived from a sliding window of previous tokens.

The victim and the detector must agree on every key bit for bit, so the
hash is fixed:

1. A window seed folds the salt and then each window token through a
   SplitMix64 finalizer chain.
2. Gumbel keys run SplitMix64 in counter mode from the window seed (XOR the
   key stream constant) and map the top 52 bits into the open interval (0, 1).
3. Green lists run a partial Fisher-Yates shuffle of 0..m-1 driven by the
   same counter construction on a separate stream constant.

Array variants process many windows at once and are bit-identical to the
scalar operations; the Monte Carlo engine and batch detection use them.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from watermark_detection.exceptions import ContractError, ParameterError

logger = logging.getLogger(__name__)

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
GOLDEN_GAMMA = 0x9E37_79B9_7F4A_7C15  # SplitMix64 increment
MIX_MUL_1 = 0xBF58_476D_1CE4_E5B9
MIX_MUL_2 = 0x94D0_49BB_1331_11EB

# Stream separation constants XOR-ed into the window seed
KEY_STREAM = 0x4B45_595F_5354_5245
GREEN_STREAM = 0x4752_4545_4E4C_5354

DEFAULT_WINDOW_WIDTH = 5
DEFAULT_PAD_TOKEN = -1

_U64 = np.uint64
_TWO_POW_M52 = 2.0**-52


@dataclass(frozen=True)
class WindowConfig:
    """How many preceding tokens feed the key, and how to pad short histories."""

    width: int = DEFAULT_WINDOW_WIDTH
    pad_token: int = DEFAULT_PAD_TOKEN
    allow_padding: bool = True

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ParameterError(f"window width must be at least 1, got {self.width}")


@dataclass(frozen=True)
class GumbelKey:
    """m uniforms (U_w) in the open interval (0, 1)."""

    u: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return int(self.u.size)


@dataclass(frozen=True)
class GreenList:
    """The green subset D of the vocabulary, in shuffle order."""

    members: np.ndarray = field(repr=False)
    m: int

    def contains(self, token: int) -> bool:
        return bool(np.any(self.members == token))

    def mask(self) -> np.ndarray:
        out = np.zeros(self.m, dtype=bool)
        out[self.members] = True
        return out

    def __len__(self) -> int:
        return int(self.members.size)


# --- 64-bit mixing ---------------------------------------------------------


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=_U64).copy()
    z ^= z >> _U64(30)
    z *= _U64(MIX_MUL_1)
    z ^= z >> _U64(27)
    z *= _U64(MIX_MUL_2)
    z ^= z >> _U64(31)
    return z


def _counter_stream(seeds: np.ndarray, count: int) -> np.ndarray:
    """SplitMix64 outputs 1..count for each seed, shape (len(seeds), count)."""
    steps = np.arange(1, count + 1, dtype=_U64) * _U64(GOLDEN_GAMMA)
    return mix64_array(seeds[:, None] + steps[None, :])


# --- window seeds ----------------------------------------------------------


def derive_seed(window: Sequence[int], salt: int, config: WindowConfig | None = None) -> int:
    """Fold the salt and then each window token into a 64-bit seed.

    Raises:
        ContractError: If the window length differs from the configured width.
    """
    config = config or WindowConfig()
    if len(window) != config.width:
        raise ContractError(f"window has {len(window)} tokens, expected {config.width}")
    h = mix64((salt + GOLDEN_GAMMA) & MASK64)
    for token in window:
        h = mix64(((h ^ (int(token) & MASK64)) + GOLDEN_GAMMA) & MASK64)
    return h


def derive_seeds(windows: np.ndarray, salt: int) -> np.ndarray:
    """Array form of derive_seed for windows of shape (R, width)."""
    windows = np.ascontiguousarray(windows, dtype=np.int64)
    if windows.ndim != 2:
        raise ContractError(f"windows must be 2-D, got shape {windows.shape}")
    h = np.full(windows.shape[0], mix64((salt + GOLDEN_GAMMA) & MASK64), dtype=_U64)
    tokens = windows.view(_U64)
    for j in range(windows.shape[1]):
        h = mix64_array((h ^ tokens[:, j]) + _U64(GOLDEN_GAMMA))
    return h


def padded_history(prompt: Sequence[int], config: WindowConfig) -> np.ndarray:
    """The prompt left-padded to at least the window width.

    Raises:
        ContractError: If the prompt is too short and padding is disabled.
    """
    prompt = np.asarray(prompt, dtype=np.int64).reshape(-1)
    missing = config.width - prompt.size
    if missing <= 0:
        return prompt
    if not config.allow_padding:
        raise ContractError(
            f"prompt has {prompt.size} tokens but the window needs {config.width} "
            "and padding is disabled"
        )
    return np.concatenate([np.full(missing, config.pad_token, dtype=np.int64), prompt])


def window_at(history: Sequence[int], t: int, config: WindowConfig | None = None) -> np.ndarray:
    """The window of `width` tokens preceding position t of a padded history."""
    config = config or WindowConfig()
    history = np.asarray(history, dtype=np.int64)
    if t < config.width or t > history.size:
        raise ContractError(f"no full window before position {t} (width {config.width})")
    return history[t - config.width : t]


def sequence_windows(
    prompt: Sequence[int], tokens: Sequence[int], config: WindowConfig | None = None
) -> np.ndarray:
    """Windows preceding each of the n tokens, shape (n, width)."""
    config = config or WindowConfig()
    head = padded_history(prompt, config)
    tokens = np.asarray(tokens, dtype=np.int64).reshape(-1)
    if tokens.size == 0:
        return np.empty((0, config.width), dtype=np.int64)
    history = np.concatenate([head[head.size - config.width :], tokens[:-1]])
    return np.ascontiguousarray(sliding_window_view(history, config.width))


# --- Gumbel keys -----------------------------------------------------------


def gumbel_keys(seeds: np.ndarray, m: int) -> np.ndarray:
    """Uniform keys for many window seeds, shape (len(seeds), m), strictly in (0, 1)."""
    if m < 2:
        raise ParameterError(f"m must be at least 2, got {m}")
    seeds = np.atleast_1d(np.asarray(seeds, dtype=_U64)) ^ _U64(KEY_STREAM)
    bits = _counter_stream(seeds, m) >> _U64(12)
    return (bits.astype(np.float64) + 0.5) * _TWO_POW_M52


def gumbel_key(seed: int, m: int) -> GumbelKey:
    """m pseudo-uniform values in (0, 1), deterministic in the seed."""
    u = gumbel_keys(np.array([seed], dtype=_U64), m)[0]
    u.flags.writeable = False
    return GumbelKey(u)


# --- green lists -----------------------------------------------------------


def green_size(m: int, gamma: float) -> int:
    """gamma * m, which must be an integer.

    Raises:
        ContractError: If gamma * m is not integral.
    """
    raw = gamma * m
    size = round(raw)
    if abs(raw - size) > 1e-9 or not 0 < size <= m:
        raise ContractError(f"gamma*m = {raw} must be an integer in 1..{m}")
    return size


def greenlist_keys(seeds: np.ndarray, m: int, gamma: float) -> np.ndarray:
    """Green lists for many window seeds, shape (len(seeds), gamma*m)."""
    size = green_size(m, gamma)
    seeds = np.atleast_1d(np.asarray(seeds, dtype=_U64)) ^ _U64(GREEN_STREAM)
    reps = seeds.size
    draws = _counter_stream(seeds, size) >> _U64(32)
    perm = np.tile(np.arange(m, dtype=np.int64), (reps, 1))
    rows = np.arange(reps)
    for j in range(size):
        # floor(draw * (m - j) / 2^32) lies in [0, m - j)
        offset = (draws[:, j] * _U64(m - j)) >> _U64(32)
        idx = j + offset.astype(np.int64)
        held = perm[rows, j].copy()
        perm[rows, j] = perm[rows, idx]
        perm[rows, idx] = held
    return perm[:, :size]


def greenlist_key(seed: int, m: int, gamma: float) -> GreenList:
    """Uniformly random gamma*m-subset of the vocabulary, deterministic in the seed."""
    members = greenlist_keys(np.array([seed], dtype=_U64), m, gamma)[0]
    members.flags.writeable = False
    return GreenList(members=members, m=m)


def green_masks(members: np.ndarray, m: int) -> np.ndarray:
    """Boolean membership masks, shape (R, m), from green lists of shape (R, k)."""
    members = np.atleast_2d(members)
    masks = np.zeros((members.shape[0], m), dtype=bool)
    masks[np.arange(members.shape[0])[:, None], members] = True
    return masks
