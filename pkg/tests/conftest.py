import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240815)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def opposed_roll_pair():
    from etrep.io import read_etrep

    return (
        read_etrep(FIXTURES / "opposed_roll_a.json"),
        read_etrep(FIXTURES / "opposed_roll_b.json"),
    )
