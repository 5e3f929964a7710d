from __future__ import annotations

from typing import Any

import numpy as np
import pytest

from rarevent import Evaluator
from rarevent import ParameterSpace
from rarevent.models import linear_g


def pytest_addoption(parser: Any) -> None:
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_configure(config: Any) -> None:
    config.addinivalue_line("markers", "slow: mark test as slow to run")


def pytest_collection_modifyitems(config: Any, items: Any) -> Any:  # pragma: no cover
    if config.getoption("--runslow"):
        # --runslow given in cli: do not skip slow tests
        return
    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture()
def plane_space() -> ParameterSpace:
    return ParameterSpace.standard_normal(2)


@pytest.fixture()
def plane_model() -> Evaluator:
    """Linear limit state with `P_f = Phi(-2)`, about 2.3e-2."""
    return Evaluator(lambda x: linear_g(x, 2.0), name="linear", dimension=2)
