import os

import pytest

from unitselect import default_config, random_config

RUN_SLOW = os.environ.get("UNITSELECT_RUN_SLOW") == "1"


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip = pytest.mark.skip(reason="set UNITSELECT_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def appendix():
    return default_config()


@pytest.fixture(scope="session")
def desk8():
    # 8 observed + 3 unobserved characteristics, randomly drawn parameters.
    return random_config(8, 3, seed=8)


@pytest.fixture(scope="session")
def desk4():
    # Seed chosen so every observed cell has probability >= 0.04: Monte-Carlo
    # tests then reach high per-cell counts without huge sample sizes.
    return random_config(4, 2, seed=370)
