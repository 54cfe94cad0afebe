import warnings

import numpy as np
import pytest

from imqed import netlist as nl


@pytest.fixture(scope="session")
def g1():
    return nl.build_example(nl.ExampleSpec.default("TlResonator2Port"))


@pytest.fixture(scope="session")
def g4():
    return nl.build_example(nl.ExampleSpec.default("CirculatorCapacitive"))


@pytest.fixture(scope="session")
def g4_y(g4):
    return nl.extract_pole_residue(g4.circuit, "Admittance")


@pytest.fixture(scope="session")
def g4_z(g4):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return nl.extract_pole_residue(g4.circuit, "Impedance")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
