"""Shared test fixtures."""

import numpy as np
import pytest

from watermark_detection.app.services import cache_service


@pytest.fixture(autouse=True)
def clear_calibration_cache():
    """Each test starts with an empty memo cache."""
    cache_service.invalidate_all()
    yield
    cache_service.invalidate_all()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def salt() -> int:
    return 0x5EED
