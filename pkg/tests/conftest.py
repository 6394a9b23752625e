from __future__ import annotations

import pytest

from quotaeq.scenarios import example1_economy, example2_economy, example3_economy, example4_economy

QUOTA_GRID = (-0.1, -0.5, -1.0, -1.5)


@pytest.fixture
def gov_economy():
    return example1_economy(-0.5, "government")


@pytest.fixture
def cat_economy():
    return example1_economy(-0.5, "cap-and-trade")


@pytest.fixture
def tax_economy():
    return example2_economy(t=0.1)


@pytest.fixture
def curve_economy():
    return example3_economy(t=1 / 6)


@pytest.fixture
def fuel_economy():
    return example4_economy(0.3)
