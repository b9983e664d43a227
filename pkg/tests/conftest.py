import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scanmask import OptimConfig, ReconParams, make_bundle


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_bundle():
    """Noiseless 32x32, 4-coil scan."""
    return make_bundle(seed=3, h=32, w=32, nc=4, noise_sigma=0.0)


@pytest.fixture(scope="session")
def small_bundles():
    """Five noiseless 32x32, 2-coil scans."""
    return [make_bundle(seed=100 + i, h=32, w=32, nc=2, noise_sigma=0.0) for i in range(5)]


@pytest.fixture
def zf():
    return ReconParams(kind="zero-filled")


@pytest.fixture
def small_config():
    return OptimConfig(budget=8, n_lowfreq=2)
