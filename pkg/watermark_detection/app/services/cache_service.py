"""In-memory memo cache for calibration results.

Moments, solver optima and Chernoff thresholds are pure functions of their
arguments but cost hundreds of quadratures, and the Monte Carlo harness asks
for the same ones once per rep. Entries never expire; invalidate explicitly.
Each joblib worker process holds its own cache.
"""

import logging
from collections.abc import Callable
from functools import wraps
from typing import Any

logger = logging.getLogger(__name__)

_cache: dict[str, Any] = {}
_stats = {"hits": 0, "misses": 0, "bypassed": 0}

# Argument types that have a stable, value-based repr
_KEYABLE = (int, float, str, bool, type(None), tuple)


def _is_keyable(value: Any) -> bool:
    if isinstance(value, tuple):
        return all(_is_keyable(v) for v in value)
    if isinstance(value, _KEYABLE):
        return True
    # Frozen dataclasses of plain fields, such as ScoreFunction
    params = getattr(value, "__dataclass_params__", None)
    if params is None or not params.frozen:
        return False
    return all(_is_keyable(getattr(value, name)) for name in value.__dataclass_fields__)


def cached(func: Callable) -> Callable:
    """Memoize a pure function by the repr of its arguments.

    Calls with arguments that have no value-based repr (lambdas, arrays) are
    passed straight through.
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        if not all(_is_keyable(a) for a in args) or not all(
            _is_keyable(v) for v in kwargs.values()
        ):
            _stats["bypassed"] += 1
            return func(*args, **kwargs)

        key_parts = [func.__qualname__, *(repr(a) for a in args)]
        key_parts.extend(f"{k}={v!r}" for k, v in sorted(kwargs.items()))
        cache_key = ":".join(key_parts)

        if cache_key in _cache:
            _stats["hits"] += 1
            return _cache[cache_key]

        _stats["misses"] += 1
        result = func(*args, **kwargs)
        _cache[cache_key] = result
        return result

    return wrapper


def invalidate_all() -> int:
    """Clear all cached entries. Returns number of entries cleared."""
    count = len(_cache)
    _cache.clear()
    for key in _stats:
        _stats[key] = 0
    logger.info(f"Cache invalidated: {count} entries cleared")
    return count


def invalidate_prefix(prefix: str) -> int:
    """Clear cached entries whose function name starts with prefix."""
    keys_to_delete = [k for k in _cache if k.startswith(prefix)]
    for k in keys_to_delete:
        del _cache[k]
    return len(keys_to_delete)


def cache_stats() -> dict:
    """Get cache statistics."""
    return {"total_entries": len(_cache), **_stats}
