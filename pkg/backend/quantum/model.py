"""
Spin-bath models.

A central system of one or two spin-1/2 qubits couples to n_B bath spins
through Heisenberg terms j S·I, the bath spins interact through dipolar
terms beta (IxIx + IyIy - 2 IzIz), and two system qubits exchange through
K S1·S2. All spin operators are half Pauli matrices; system sites come
first in the tensor ordering.
"""

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from backend.quantum.errors import DimensionMismatch, DimensionTooLarge, UnknownName
from backend.quantum.linalg_core import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    check_normalized,
    projector,
)
from backend.quantum.randomness import stream

log = logging.getLogger(__name__)

MAX_TOTAL_QUBITS = 11
MAX_BATH_SPINS = 10


def _check_sizes(n_qubits: int, n_B: int):
    if n_qubits not in (1, 2):
        raise DimensionMismatch(f"n_qubits must be 1 or 2, got {n_qubits}")
    if n_qubits + n_B > MAX_TOTAL_QUBITS or n_B > MAX_BATH_SPINS:
        raise DimensionTooLarge(
            f"2^({n_qubits}+{n_B}) exceeds the supported dimension 2^{MAX_TOTAL_QUBITS}"
        )
    if n_B < 1:
        raise DimensionMismatch(f"n_B must be at least 1, got {n_B}")


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SpinBathModel:
    """Couplings of one system + bath realization (energies in units of J)"""
    n_qubits: int
    n_B: int
    couplings: np.ndarray
    dipolar: np.ndarray
    K: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _check_sizes(self.n_qubits, self.n_B)
        couplings = _frozen(self.couplings).reshape(self.n_B, self.n_qubits)
        dipolar = _frozen(np.tril(np.asarray(self.dipolar, dtype=float), k=-1))
        if dipolar.shape != (self.n_B, self.n_B):
            raise DimensionMismatch(f"dipolar matrix must be {self.n_B}x{self.n_B}")
        dipolar.setflags(write=False)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "dipolar", dipolar)
        if self.n_qubits == 1 and self.K != 0.0:
            log.warning(f"K={self.K} ignored for a single-qubit system")
            object.__setattr__(self, "K", 0.0)

    @property
    def system_dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def bath_dim(self) -> int:
        return 2 ** self.n_B

    @property
    def dims(self) -> Tuple[int, int]:
        return self.system_dim, self.bath_dim

    @classmethod
    def from_arrays(cls, couplings, dipolar=None, K: float = 0.0, seed: int = 0) -> "SpinBathModel":
        couplings = np.asarray(couplings, dtype=float)
        if couplings.ndim == 1:
            couplings = couplings[:, None]
        n_B, n_qubits = couplings.shape
        if dipolar is None:
            dipolar = np.zeros((n_B, n_B))
        return cls(n_qubits=n_qubits, n_B=n_B, couplings=couplings, dipolar=dipolar, K=K, seed=seed)

    def to_dict(self) -> Dict:
        return {
            'n_qubits': self.n_qubits,
            'n_B': self.n_B,
            'couplings': self.couplings.tolist(),
            'dipolar': self.dipolar.tolist(),
            'K': self.K,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SpinBathModel":
        return cls(
            n_qubits=int(data['n_qubits']),
            n_B=int(data['n_B']),
            couplings=np.asarray(data['couplings'], dtype=float),
            dipolar=np.asarray(data.get('dipolar', np.zeros((data['n_B'], data['n_B']))), dtype=float),
            K=float(data.get('K', 0.0)),
            seed=int(data.get('seed', 0)),
        )


@dataclass(frozen=True)
class CouplingEnsembleSpec:
    """Recipe for drawing a SpinBathModel; K=None means 'match J_cap' for two qubits"""
    J_cap: float = 1.0
    beta_cap: float = 0.0
    K: Optional[float] = None
    n_qubits: int = 1
    n_B: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.J_cap > 0:
            raise ValueError(f"J_cap must be positive, got {self.J_cap}")
        if self.beta_cap < 0:
            raise ValueError(f"beta_cap must be nonnegative, got {self.beta_cap}")
        _check_sizes(self.n_qubits, self.n_B)

    @property
    def resolved_K(self) -> float:
        if self.n_qubits == 1:
            return 0.0
        return self.J_cap if self.K is None else float(self.K)


def sample_couplings(spec: CouplingEnsembleSpec) -> SpinBathModel:
    """Draw j ~ U[-J_cap, J_cap] and beta ~ U[-beta_cap, beta_cap] from the seed's streams"""
    _check_sizes(spec.n_qubits, spec.n_B)
    couplings = stream(spec.seed, "couplings").uniform(-spec.J_cap, spec.J_cap, size=(spec.n_B, spec.n_qubits))
    if spec.beta_cap == 0:
        dipolar = np.zeros((spec.n_B, spec.n_B))
    else:
        dipolar = stream(spec.seed, "dipolar").uniform(-spec.beta_cap, spec.beta_cap, size=(spec.n_B, spec.n_B))
    return SpinBathModel(
        n_qubits=spec.n_qubits,
        n_B=spec.n_B,
        couplings=couplings,
        dipolar=np.tril(dipolar, k=-1),
        K=spec.resolved_K,
        seed=spec.seed,
    )


# ---------------------------------------------------------------------------
# Hamiltonian assembly
# ---------------------------------------------------------------------------

_HALF_PAULIS = tuple(sp.csr_matrix(0.5 * p) for p in (PAULI_X, PAULI_Y, PAULI_Z))
_ID2 = sp.identity(2, dtype=complex, format="csr")


def _spin_operators(n_sites: int) -> List[Tuple[sp.csr_matrix, ...]]:
    """(Sx, Sy, Sz) embedded on every site of an n_sites register"""
    operators = []
    for site in range(n_sites):
        components = []
        for half_pauli in _HALF_PAULIS:
            factors = [_ID2] * n_sites
            factors[site] = half_pauli
            components.append(reduce(lambda a, b: sp.kron(a, b, format="csr"), factors))
        operators.append(tuple(components))
    return operators


def _heisenberg(a, b) -> sp.csr_matrix:
    return a[0] @ b[0] + a[1] @ b[1] + a[2] @ b[2]


def _dipolar(a, b) -> sp.csr_matrix:
    return a[0] @ b[0] + a[1] @ b[1] - 2.0 * (a[2] @ b[2])


def _assemble(model: SpinBathModel, bath: bool = True, exchange: bool = True) -> np.ndarray:
    n_sites = model.n_qubits + model.n_B
    spins = _spin_operators(n_sites)
    dim = 2 ** n_sites
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for m in range(model.n_B):
        for k in range(model.n_qubits):
            if model.couplings[m, k] != 0.0:
                H = H + model.couplings[m, k] * _heisenberg(spins[k], spins[model.n_qubits + m])
    if bath:
        for m in range(model.n_B):
            for mp in range(m):
                if model.dipolar[m, mp] != 0.0:
                    H = H + model.dipolar[m, mp] * _dipolar(
                        spins[model.n_qubits + m], spins[model.n_qubits + mp]
                    )
    if exchange and model.n_qubits == 2 and model.K != 0.0:
        H = H + model.K * _heisenberg(spins[0], spins[1])
    H = H.toarray()
    return 0.5 * (H + H.conj().T)


def build_H0(model: SpinBathModel) -> np.ndarray:
    """Full system+bath Hamiltonian H_SB + I_S ⊗ H_B (+ K S1·S2)"""
    return _assemble(model)


def system_bath_hamiltonian(model: SpinBathModel) -> np.ndarray:
    return _assemble(model, bath=False, exchange=False)


def coupling_strength_A(model: SpinBathModel, qubit_index: int = 0) -> float:
    """A = sqrt(sum_m j_m^2 / n_B) for one system qubit"""
    if not 0 <= qubit_index < model.n_qubits:
        raise DimensionMismatch(f"qubit_index {qubit_index} out of range for {model.n_qubits} qubit(s)")
    column = model.couplings[:, qubit_index]
    return float(np.sqrt(np.sum(column ** 2) / model.n_B))


def initial_state(system_state, model: SpinBathModel) -> np.ndarray:
    """|psi><psi| ⊗ I_B / 2^n_B"""
    psi = check_normalized(system_state, "system state")
    if psi.shape[0] != model.system_dim:
        raise DimensionMismatch(f"system state has dimension {psi.shape[0]}, model expects {model.system_dim}")
    return np.kron(projector(psi), np.eye(model.bath_dim, dtype=complex) / model.bath_dim)


# ---------------------------------------------------------------------------
# Named system states
# ---------------------------------------------------------------------------

_SQRT_HALF = 1.0 / np.sqrt(2.0)

_QUBIT_STATES = {
    '0': np.array([1, 0], dtype=complex),
    '1': np.array([0, 1], dtype=complex),
    '+Z': np.array([1, 0], dtype=complex),
    '-Z': np.array([0, 1], dtype=complex),
    '+X': np.array([1, 1], dtype=complex) * _SQRT_HALF,
    '-X': np.array([1, -1], dtype=complex) * _SQRT_HALF,
    '+Y': np.array([1, 1j], dtype=complex) * _SQRT_HALF,
    '-Y': np.array([1, -1j], dtype=complex) * _SQRT_HALF,
}


def bell_states() -> Dict[str, np.ndarray]:
    """EPR0 = (|01>+|10>)/√2, EPR1 = (|01>-|10>)/√2, EPR2 = (|00>+|11>)/√2, EPR3 = (|00>-|11>)/√2"""
    return {
        'EPR0': np.array([0, 1, 1, 0], dtype=complex) * _SQRT_HALF,
        'EPR1': np.array([0, 1, -1, 0], dtype=complex) * _SQRT_HALF,
        'EPR2': np.array([1, 0, 0, 1], dtype=complex) * _SQRT_HALF,
        'EPR3': np.array([1, 0, 0, -1], dtype=complex) * _SQRT_HALF,
    }


def _strip(label: str) -> str:
    label = label.strip()
    if label.startswith('|') and label.endswith('>'):
        label = label[1:-1]
    return label


def named_state(label: str, n_qubits: int = 1) -> np.ndarray:
    """
    Resolve a state label.

    Args:
        label: '0', '+X', '|+Z>', computational strings like '01', or 'EPR0'..'EPR3'
        n_qubits: register size the state must fit

    Returns:
        normalized state vector of dimension 2**n_qubits
    """
    key = _strip(label)
    if n_qubits == 2 and key.upper() in bell_states():
        return bell_states()[key.upper()]
    if key in _QUBIT_STATES and n_qubits == 1:
        return _QUBIT_STATES[key].copy()
    if len(key) == n_qubits and set(key) <= {'0', '1'}:
        vector = np.zeros(2 ** n_qubits, dtype=complex)
        vector[int(key, 2)] = 1.0
        return vector
    raise UnknownName(f"unknown state label '{label}' for {n_qubits} qubit(s)")
