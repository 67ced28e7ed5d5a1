import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from horizonplan.mdp import as_cached, chain2_model


@pytest.fixture
def chain2():
    return chain2_model()


@pytest.fixture
def chain2_cached():
    return as_cached(chain2_model())
