import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sunn import SignalField  # noqa: E402
from sunn.synthetic import square_scene  # noqa: E402


@pytest.fixture
def square():
    img, mask = square_scene(64)
    return SignalField.from_array(img), mask


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
