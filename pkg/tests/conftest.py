import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from panrisk.volume import Mask, Volume


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_volume(rng, dims=(8, 8, 8), spacing=(1.0, 1.0, 1.0)):
    return Volume(data=rng.normal(50.0, 10.0, dims), spacing=spacing)


def random_roi(rng, max_dim=6, p_fg=0.7):
    """Small random volume + random nonempty mask for oracle comparisons."""
    dims = tuple(int(d) for d in rng.integers(2, max_dim + 1, size=3))
    data = rng.normal(0.0, 1.0, dims)
    mask = rng.random(dims) < p_fg
    if not mask.any():
        mask[0, 0, 0] = True
    return Volume(data=data), Mask(data=mask)
