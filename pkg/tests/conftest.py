import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lmor.lti import DescriptorModel  # noqa: E402


@pytest.fixture
def lag():
    """H(s) = 1/(s+1)."""
    return DescriptorModel.from_abcd([[-1.0]], [[1.0]], [[1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
