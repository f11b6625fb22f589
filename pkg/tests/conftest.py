import numpy as np
import pytest

from errest.hierarchy import CategoryTree

EXAMPLE_LEAVES = ["1", "2.1", "2.2.1", "2.2.2", "2.3", "3.1", "3.2"]


@pytest.fixture(scope="session")
def example_tree() -> CategoryTree:
    """Three-branch tree with 7 leaves and internal class nodes 2, 2.2, 3."""
    return CategoryTree(EXAMPLE_LEAVES)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
