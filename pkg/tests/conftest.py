import numpy as np
import pytest

from backend.quantum.linalg_core import PAULI_X, PAULI_Y, PAULI_Z
from config import simulation_config


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_hermitian(rng):
    def factory(dim, scale=1.0):
        A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return scale * 0.5 * (A + A.conj().T)
    return factory


@pytest.fixture
def make_unitary(rng):
    def factory(dim):
        A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        Q, R = np.linalg.qr(A)
        return Q * (np.diag(R) / np.abs(np.diag(R)))
    return factory


@pytest.fixture
def paulis():
    return {'X': PAULI_X, 'Y': PAULI_Y, 'Z': PAULI_Z}


@pytest.fixture(autouse=True)
def fresh_simulation_config(monkeypatch):
    """Every test sees the YAML defaults without POINTER_* overrides from the shell"""
    for key in simulation_config.ENV_OVERRIDES:
        monkeypatch.delenv(key, raising=False)
    simulation_config.reset_simulation_config()
    yield
    simulation_config.reset_simulation_config()
