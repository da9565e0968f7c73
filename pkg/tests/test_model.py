import logging

import numpy as np
import pytest

from backend.quantum.errors import DimensionTooLarge, NotNormalized, UnknownName
from backend.quantum.linalg_core import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    evolve_propagator,
    partial_trace_bath,
    projector,
    tensor_all,
)
from backend.quantum.model import (
    CouplingEnsembleSpec,
    SpinBathModel,
    build_H0,
    coupling_strength_A,
    initial_state,
    named_state,
    sample_couplings,
)


def _total_spin(n_sites, pauli):
    total = 0
    for site in range(n_sites):
        factors = [PAULI_I] * n_sites
        factors[site] = 0.5 * pauli
        total = total + tensor_all(*factors)
    return total


def test_sampling_is_deterministic_per_seed():
    spec = CouplingEnsembleSpec(J_cap=1.0, beta_cap=0.2, n_B=4, seed=7)
    first, second = sample_couplings(spec), sample_couplings(spec)
    assert np.array_equal(first.couplings, second.couplings)
    assert np.array_equal(first.dipolar, second.dipolar)
    other = sample_couplings(CouplingEnsembleSpec(J_cap=1.0, beta_cap=0.2, n_B=4, seed=8))
    assert not np.array_equal(first.couplings, other.couplings)


def test_sampled_couplings_respect_caps():
    model = sample_couplings(CouplingEnsembleSpec(J_cap=0.5, beta_cap=0.1, n_B=6, seed=3))
    assert np.all(np.abs(model.couplings) <= 0.5)
    assert np.all(np.abs(model.dipolar) <= 0.1)
    assert np.all(np.triu(model.dipolar) == 0)


def test_zero_beta_cap_gives_no_dipolar_terms():
    model = sample_couplings(CouplingEnsembleSpec(n_B=3, seed=1))
    assert not np.any(model.dipolar)


def test_dimension_limits():
    with pytest.raises(DimensionTooLarge):
        CouplingEnsembleSpec(n_qubits=2, n_B=10)
    with pytest.raises(DimensionTooLarge):
        CouplingEnsembleSpec(n_qubits=1, n_B=11)


def test_single_qubit_ignores_exchange(caplog):
    with caplog.at_level(logging.WARNING):
        model = SpinBathModel.from_arrays([0.3, 0.4], K=0.5)
    assert model.K == 0.0
    assert "ignored" in caplog.text


def test_two_qubit_exchange_defaults_to_j_cap():
    spec = CouplingEnsembleSpec(J_cap=0.8, n_qubits=2, n_B=2)
    assert spec.resolved_K == 0.8
    assert sample_couplings(spec).K == 0.8


def test_heisenberg_pair_spectrum():
    H = build_H0(SpinBathModel.from_arrays([1.0]))
    assert np.allclose(np.linalg.eigvalsh(H), [-0.75, 0.25, 0.25, 0.25])


def test_isotropic_model_commutes_with_global_rotations():
    model = sample_couplings(CouplingEnsembleSpec(n_B=3, seed=11))
    H = build_H0(model)
    n_sites = 4
    axis = np.array([0.2, -0.5, 0.84])
    axis /= np.linalg.norm(axis)
    generator = sum(a * _total_spin(n_sites, p) for a, p in zip(axis, (PAULI_X, PAULI_Y, PAULI_Z)))
    U = evolve_propagator(generator, 1.3)
    assert np.allclose(U @ H @ U.conj().T, H, atol=1e-12)


def test_coupling_strength_A():
    model = SpinBathModel.from_arrays([3.0, 4.0])
    assert coupling_strength_A(model) == pytest.approx(np.sqrt(12.5))
    flipped = SpinBathModel.from_arrays([-3.0, 4.0])
    assert coupling_strength_A(flipped) == coupling_strength_A(model)


def test_initial_state_has_maximally_mixed_bath():
    model = SpinBathModel.from_arrays([0.1, 0.2, 0.3])
    psi = named_state("+X")
    rho = initial_state(psi, model)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(partial_trace_bath(rho, 2, 8), projector(psi))
    with pytest.raises(NotNormalized):
        initial_state([1.0, 1.0], model)


def test_named_states():
    assert np.allclose(named_state("|+X>"), np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(named_state("01", n_qubits=2), [0, 1, 0, 0])
    assert np.allclose(named_state("EPR1", n_qubits=2), np.array([0, 1, -1, 0]) / np.sqrt(2))
    with pytest.raises(UnknownName):
        named_state("+W")


def test_model_dict_round_trip():
    model = sample_couplings(CouplingEnsembleSpec(beta_cap=0.3, n_qubits=2, n_B=3, seed=5))
    restored = SpinBathModel.from_dict(model.to_dict())
    assert np.array_equal(build_H0(restored), build_H0(model))
