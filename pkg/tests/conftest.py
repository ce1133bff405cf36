import warnings

import pytest

from boxqp import bench
from boxqp.backend import CvxpyBackend

# interior-point warm-up chatter from the modeling layer is not a test signal
warnings.filterwarnings("ignore", message="Solution may be inaccurate")


@pytest.fixture(scope="session")
def backend() -> CvxpyBackend:
    return CvxpyBackend()


@pytest.fixture(scope="session")
def bl():
    return bench.builtin_bl()
