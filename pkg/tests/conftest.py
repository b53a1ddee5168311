import sys
from pathlib import Path

import numpy as np
import pytest

# Los módulos de telechan/ se importan por nombre, igual que entre ellos
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "telechan"))

from classify import SUMMARY_ORDER, InputClass, classify_all  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def reports():
    """Clasificación completa de las siete clases (compartida por toda la sesión)."""
    return {cls: classify_all(cls) for cls in SUMMARY_ORDER}


@pytest.fixture(scope="session")
def swapped_reports():
    return {
        cls: classify_all(cls, swap_bob=True)
        for cls in (InputClass.LEFT_COL, InputClass.RIGHT_COL)
    }
