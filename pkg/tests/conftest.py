import numpy as np
import pytest

from core import construct, gf
from utility import presets


@pytest.fixture(scope="session")
def f8():
    """F_8 from 1 + x + x^3."""
    return gf.make_field(3)


@pytest.fixture(scope="session")
def f256():
    """F_256 from x^8 + x^4 + x^3 + x^2 + 1."""
    return gf.make_field(8)


@pytest.fixture(scope="session")
def example_pair():
    return presets.example()


@pytest.fixture(scope="session")
def example_arrays(example_pair):
    return construct.build_arrays(example_pair)


@pytest.fixture(scope="session")
def small_code(example_pair):
    """The P = 8 example labeled over F_8 with the zero systems only."""
    return construct.build_code(presets.EXAMPLE_P, 3, gen=example_pair,
                                mode="conventional", seed=0)


@pytest.fixture(scope="session")
def preset_code():
    """The P = 384 published pair labeled over F_256."""
    return construct.build_code(384, 8, gen=presets.published(384), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
