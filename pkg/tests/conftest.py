import numpy as np
import pytest

from subwass.bernstein import DriftStable, Stable, StableMix

CATALOG = [
    Stable(0.5),
    Stable(1.0),
    Stable(0.25),
    DriftStable(drift=0.5, alpha=0.5),
    StableMix(alpha=0.75, beta=0.25, weight=0.3),
]


@pytest.fixture(params=CATALOG, ids=lambda s: type(s).__name__ + str(s.components))
def spec(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
