"""Shared pytest fixtures."""

import numpy as np
import pytest

from app.config import get_settings
from tests.oracles import make_psd


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def random_psd(rng):
    """Factory for random PSD matrices drawn from the test generator."""

    def _make(n: int, rank: int | None = None, ridge: float = 0.0) -> np.ndarray:
        return make_psd(rng, n, rank, ridge)

    return _make


@pytest.fixture(autouse=True)
def fresh_settings():
    """Drop cached settings so environment overrides in a test take effect."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
