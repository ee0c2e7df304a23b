"""Token-sequence simulators for H0 and every H1 variant.

Each step t of a simulated text:
1. Takes the window of preceding tokens and derives the step's key
   (Gumbel uniforms or a green list) from it and the salt.
2. Draws the NTP distribution P_t from the scenario's policy.
3. Emits a token with the sampler of the scenario's mode:
   - null: omega_t ~ P_t, ignoring the key
   - complete: the watermarked rule itself
   - partial: the watermarked choice with probability >= theta, otherwise
     a draw from the rest of the vocabulary (Gumbel) or the red list

Samplers take an explicit numpy Generator and consume a fixed number of
uniforms per step (policy draws first, then sampler draws), so the batched
engine `generate_batch` reproduces `generate_sequence` exactly for every rep.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, model_validator

from watermark_detection.exceptions import ContractError, DegenerateSupportError
from watermark_detection.watermark.core import DistributionClassParams, NtpDistribution
from watermark_detection.watermark.keying import (
    GreenList,
    GumbelKey,
    WindowConfig,
    derive_seed,
    derive_seeds,
    green_masks,
    green_size,
    greenlist_key,
    greenlist_keys,
    gumbel_key,
    gumbel_keys,
    padded_history,
    window_at,
)

logger = logging.getLogger(__name__)

Scheme = Literal["gumbel", "redgreen"]
Mode = Literal["null", "complete", "partial"]
NtpPolicyName = Literal["spike", "uniform", "dirichlet"]

# Uniform draws each sampler takes per step, after the policy's draws
SAMPLER_DRAWS: dict[tuple[str, str], int] = {
    ("gumbel", "null"): 1,
    ("gumbel", "complete"): 0,
    ("gumbel", "partial"): 3,  # theta', keep-coin, residual draw
    ("redgreen", "null"): 1,
    ("redgreen", "complete"): 1,
    ("redgreen", "partial"): 2,  # list draw, side coin
}


# --- NTP policies ----------------------------------------------------------


def spike_ntp(noise: np.random.Generator, delta: float, m: int) -> np.ndarray:
    """1 - delta on a pseudorandom index, delta spread uniformly over the rest."""
    idx = min(int(noise.random() * m), m - 1)
    probs = np.full(m, delta / (m - 1))
    probs[idx] = 1.0 - delta
    return probs


def uniform_ntp(noise: np.random.Generator, delta: float, m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


def dirichlet_ntp(noise: np.random.Generator, delta: float, m: int) -> np.ndarray:
    """A flat-Dirichlet NTP vector; delta is ignored."""
    return noise.dirichlet(np.ones(m))


NTP_POLICIES: dict[str, Callable[[np.random.Generator, float, int], np.ndarray]] = {
    "spike": spike_ntp,
    "uniform": uniform_ntp,
    "dirichlet": dirichlet_ntp,
}


def draw_ntp_batch(
    policy: str, noises: Sequence[np.random.Generator], deltas: np.ndarray, m: int
) -> np.ndarray:
    """One NTP vector per rep, shape (R, m), consuming each rep's noise like the scalar policy."""
    reps = len(noises)
    if policy == "uniform":
        return np.full((reps, m), 1.0 / m)
    if policy == "spike":
        u = np.array([g.random() for g in noises])
        idx = np.minimum((u * m).astype(np.int64), m - 1)
        probs = np.repeat((deltas / (m - 1))[:, None], m, axis=1)
        probs[np.arange(reps), idx] = 1.0 - deltas
        return probs
    draw = NTP_POLICIES[policy]
    return np.stack([draw(g, float(d), m) for g, d in zip(noises, deltas, strict=True)])


# --- samplers --------------------------------------------------------------


def _inverse_cdf(weights: np.ndarray, u: float) -> int:
    """Index drawn proportionally to nonnegative weights using one uniform."""
    cumulative = np.cumsum(weights)
    return int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))


def _inverse_cdf_batch(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cumulative = np.cumsum(weights, axis=1)
    return np.argmax(cumulative > (u * cumulative[:, -1])[:, None], axis=1)


def _gumbel_argmax(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """argmax of log(u)/p along the last axis; p = 0 scores -inf, ties go to the lowest index."""
    with np.errstate(divide="ignore"):
        scores = np.where(probs > 0, np.log(u) / np.where(probs > 0, probs, 1.0), -np.inf)
    return np.argmax(scores, axis=-1)


def sample_null(p: NtpDistribution, noise: np.random.Generator) -> int:
    """omega ~ p, independent of any key."""
    return _inverse_cdf(p.probs, noise.random())


def gumbel_complete_next(p: NtpDistribution, key: GumbelKey) -> int:
    """The Gumbel-max choice argmax_w log(U_w) / p_w.

    Raises:
        ContractError: If p has no positive entry or the key size differs.
    """
    if key.m != p.m:
        raise ContractError(f"key has {key.m} entries, NTP vector has {p.m}")
    if not np.any(p.probs > 0):
        raise ContractError("NTP vector has no positive entry")
    return int(_gumbel_argmax(p.probs, key.u))


def gumbel_partial_next(
    p: NtpDistribution, key: GumbelKey, theta: float, noise: np.random.Generator
) -> int:
    """Keep the Gumbel choice with probability theta' ~ U[theta, 1], else resample.

    The replacement token is drawn from p restricted to the other tokens and
    renormalized.
    """
    choice = gumbel_complete_next(p, key)
    theta_draw, coin, residual = noise.random(3)
    theta_prime = theta + (1.0 - theta) * theta_draw
    if coin < theta_prime:
        return choice
    weights = p.probs.copy()
    weights[choice] = 0.0
    if not np.any(weights > 0):
        return choice
    return _inverse_cdf(weights, residual)


def rg_complete_next(p: NtpDistribution, green: GreenList, noise: np.random.Generator) -> int:
    """omega ~ p renormalized over the green list.

    Raises:
        DegenerateSupportError: If p puts no mass on the green list.
    """
    weights = p.probs * green.mask()
    if not np.any(weights > 0):
        raise DegenerateSupportError("NTP distribution has no mass on the green list")
    return _inverse_cdf(weights, noise.random())


def rg_partial_next(
    p: NtpDistribution, green: GreenList, theta: float, noise: np.random.Generator
) -> int:
    """Green-renormalized draw with probability theta, red-renormalized otherwise.

    Raises:
        DegenerateSupportError: If either side the sampler may need carries no mass.
    """
    mask = green.mask()
    green_weights = p.probs * mask
    red_weights = p.probs * ~mask
    if not np.any(green_weights > 0):
        raise DegenerateSupportError("NTP distribution has no mass on the green list")
    if theta < 1.0 and not np.any(red_weights > 0):
        raise DegenerateSupportError("NTP distribution has no mass on the red list")
    u, coin = noise.random(2)
    return _inverse_cdf(green_weights if coin < theta else red_weights, u)


# --- scenarios -------------------------------------------------------------


class ScenarioSpec(BaseModel):
    """A generation scenario: scheme, inheritance mode, NTP policy and length."""

    scheme: Scheme = "gumbel"
    mode: Mode = "complete"
    params: DistributionClassParams = DistributionClassParams()
    ntp_policy: NtpPolicyName = "spike"
    n: int = 200
    m: int = 1000
    prompt: tuple[int, ...] = ()
    window_width: int = 5

    model_config = {"frozen": True, "extra": "forbid"}

    @model_validator(mode="after")
    def _check_consistency(self) -> "ScenarioSpec":
        if self.n < 1:
            raise ValueError(f"length n must be at least 1, got {self.n}")
        if self.m < 2:
            raise ValueError(f"vocabulary size m must be at least 2, got {self.m}")
        if self.mode == "partial" and self.params.theta is None:
            raise ValueError("partial mode requires theta")
        if self.scheme == "redgreen":
            green_size(self.m, self.params.gamma)
        if self.ntp_policy == "spike" and self.params.delta > (self.m - 1) / self.m:
            raise ValueError(f"delta must be at most 1 - 1/m = {(self.m - 1) / self.m}")
        if any(not 0 <= tok < self.m for tok in self.prompt):
            raise ValueError("prompt tokens must lie in 0..m-1")
        return self

    @property
    def window(self) -> WindowConfig:
        return WindowConfig(width=self.window_width)


@dataclass
class GeneratedText:
    """A simulated token sequence with what replay tests need."""

    tokens: np.ndarray
    prompt: np.ndarray
    pivotals: np.ndarray  # Y_t seen at generation time
    ntp: np.ndarray = field(repr=False)  # (n, m) NTP vectors used
    scheme: str = "gumbel"
    salt: int = 0

    @property
    def n(self) -> int:
        return int(self.tokens.size)


def generate_sequence(
    spec: ScenarioSpec, salt: int, noise: np.random.Generator
) -> GeneratedText:
    """Simulate one text under the scenario, recording tokens, pivotals and NTP vectors."""
    config = spec.window
    history = list(padded_history(spec.prompt, config))
    policy = NTP_POLICIES[spec.ntp_policy]
    theta = spec.params.theta if spec.params.theta is not None else 1.0
    tokens = np.empty(spec.n, dtype=np.int64)
    pivotals = np.empty(spec.n, dtype=np.float64)
    ntp = np.empty((spec.n, spec.m), dtype=np.float64)

    for t in range(spec.n):
        seed = derive_seed(window_at(history, len(history), config), salt, config)
        p = NtpDistribution(policy(noise, spec.params.delta, spec.m))
        ntp[t] = p.probs

        if spec.scheme == "gumbel":
            key = gumbel_key(seed, spec.m)
            if spec.mode == "null":
                token = sample_null(p, noise)
            elif spec.mode == "complete":
                token = gumbel_complete_next(p, key)
            else:
                token = gumbel_partial_next(p, key, theta, noise)
            pivotals[t] = key.u[token]
        else:
            green = greenlist_key(seed, spec.m, spec.params.gamma)
            if spec.mode == "null":
                token = sample_null(p, noise)
            elif spec.mode == "complete":
                token = rg_complete_next(p, green, noise)
            else:
                token = rg_partial_next(p, green, theta, noise)
            pivotals[t] = float(green.contains(token))

        tokens[t] = token
        history.append(token)

    logger.debug(f"Generated {spec.n} tokens ({spec.scheme}/{spec.mode})")
    return GeneratedText(
        tokens=tokens,
        prompt=np.asarray(spec.prompt, dtype=np.int64),
        pivotals=pivotals,
        ntp=ntp,
        scheme=spec.scheme,
        salt=salt,
    )


# --- batched engine --------------------------------------------------------


@dataclass
class GeneratedBatch:
    """R texts advanced in lockstep."""

    tokens: np.ndarray  # (R, n)
    pivotals: np.ndarray  # (R, n)
    ntp_max: np.ndarray  # (R, n), largest NTP probability at each step


def generate_batch(
    scheme: str,
    mode: str,
    n: int,
    m: int,
    salt: int,
    noises: Sequence[np.random.Generator],
    deltas: np.ndarray,
    prompts: np.ndarray,
    theta: float = 1.0,
    gamma: float = 0.5,
    ntp_policy: str = "spike",
    window: WindowConfig | None = None,
) -> GeneratedBatch:
    """Vectorized generation of len(noises) texts of length n.

    Rep r uses noises[r], deltas[r] and prompts[r], and its output equals
    generate_sequence for the same scenario and generator.
    """
    window = window or WindowConfig()
    reps = len(noises)
    rows = np.arange(reps)
    deltas = np.asarray(deltas, dtype=np.float64)
    windows = np.stack([padded_history(p, window)[-window.width :] for p in prompts])
    n_draws = SAMPLER_DRAWS[(scheme, mode)]
    tokens = np.empty((reps, n), dtype=np.int64)
    pivotals = np.empty((reps, n), dtype=np.float64)
    ntp_max = np.empty((reps, n), dtype=np.float64)

    for t in range(n):
        seeds = derive_seeds(windows, salt)
        probs = draw_ntp_batch(ntp_policy, noises, deltas, m)
        ntp_max[:, t] = probs.max(axis=1)
        draws = np.stack([g.random(n_draws) for g in noises]) if n_draws else None

        if scheme == "gumbel":
            u = gumbel_keys(seeds, m)
            if mode == "null":
                step = _inverse_cdf_batch(probs, draws[:, 0])
            else:
                step = _gumbel_argmax(probs, u)
                if mode == "partial":
                    step = _gumbel_partial_batch(probs, step, theta, draws)
            pivotals[:, t] = u[rows, step]
        else:
            mask = green_masks(greenlist_keys(seeds, m, gamma), m)
            if mode == "null":
                step = _inverse_cdf_batch(probs, draws[:, 0])
            else:
                step = _redgreen_batch(probs, mask, theta if mode == "partial" else 1.0, draws)
            pivotals[:, t] = mask[rows, step]

        tokens[:, t] = step
        windows = np.concatenate([windows[:, 1:], step[:, None]], axis=1)

    return GeneratedBatch(tokens=tokens, pivotals=pivotals, ntp_max=ntp_max)


def _gumbel_partial_batch(
    probs: np.ndarray, choice: np.ndarray, theta: float, draws: np.ndarray
) -> np.ndarray:
    rows = np.arange(probs.shape[0])
    theta_prime = theta + (1.0 - theta) * draws[:, 0]
    keep = draws[:, 1] < theta_prime
    weights = probs.copy()
    weights[rows, choice] = 0.0
    has_residual = np.any(weights > 0, axis=1)
    resampled = _inverse_cdf_batch(weights, draws[:, 2])
    return np.where(keep | ~has_residual, choice, resampled)


def _redgreen_batch(
    probs: np.ndarray, mask: np.ndarray, theta: float, draws: np.ndarray
) -> np.ndarray:
    green_weights = probs * mask
    red_weights = probs * ~mask
    if not np.all(np.any(green_weights > 0, axis=1)):
        raise DegenerateSupportError("NTP distribution has no mass on the green list")
    if theta < 1.0:
        if not np.all(np.any(red_weights > 0, axis=1)):
            raise DegenerateSupportError("NTP distribution has no mass on the red list")
        use_green = draws[:, 1] < theta
        weights = np.where(use_green[:, None], green_weights, red_weights)
    else:
        weights = green_weights
    return _inverse_cdf_batch(weights, draws[:, 0])
