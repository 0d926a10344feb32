import numpy as np
import pytest

from seqdim import Scenario, build_basis


@pytest.fixture(scope="session")
def basis_322_d2_k1():
    return build_basis(Scenario.parse("3-2-2"), 2, 1, np.random.default_rng(42), seed=42)


@pytest.fixture(scope="session")
def basis_322_d2_k2():
    return build_basis(Scenario.parse("3-2-2"), 2, 2, np.random.default_rng(42), seed=42)


@pytest.fixture(scope="session")
def basis_232_d2_k1():
    return build_basis(Scenario.parse("2-3-2"), 2, 1, np.random.default_rng(11), seed=11)


@pytest.fixture(scope="session")
def basis_233_d3_k1():
    return build_basis(Scenario.parse("2-3-3"), 3, 1, np.random.default_rng(7), seed=7)
