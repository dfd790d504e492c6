import pytest

from propm import Instance, make_counterexample


@pytest.fixture(scope="session")
def i_cp() -> Instance:
    """Single agent, values 40/30/20/10: the classic CP tie-break example."""
    return Instance.of([[40, 30, 20, 10]])


@pytest.fixture(scope="session")
def i_eps() -> Instance:
    """Three identical agents, one item worth 94 and six worth 1 (total 100)."""
    return make_counterexample(100)


@pytest.fixture(scope="session")
def i_2a() -> Instance:
    """Two agents with opposed preferences over two items."""
    return Instance.of([[60, 40], [10, 90]])
