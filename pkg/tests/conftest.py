import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import two_bus  # noqa: E402


@pytest.fixture
def net2():
    return two_bus()


@pytest.fixture
def net2_fixed_load():
    # bus 2 is a fixed 0.196 p.u. load; bus 1 a dispatchable source
    return two_bus(p1=(0.0, 1.0), p2=(-0.196, -0.196))
