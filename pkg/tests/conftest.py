"""
Shared fixtures for the laboratory tests
"""

import numpy as np
import pytest

from src.models import EquationKind, EquationParams
from src.seeding import keyed_rng
from src.spectral_core import make_grid


@pytest.fixture
def kawahara():
    return EquationParams(1.0, -1.0, EquationKind.KAWAHARA)


@pytest.fixture
def modified_kawahara():
    return EquationParams(1.0, -1.0, EquationKind.MODIFIED_KAWAHARA)


@pytest.fixture
def grid():
    """64 points on a box of length 16 pi (xi spacing 1/8)"""
    return make_grid(64, 16.0 * np.pi)


@pytest.fixture
def rng():
    return keyed_rng(1234, "tests")
