"""
Dense complex operator algebra.

Operators are plain complex128 numpy arrays. The role of an operator
(Hermitian, unitary, density matrix) is enforced by the check_* functions
at module boundaries rather than by wrapper classes, so every numpy and
scipy routine works on them directly.

Composite spaces always order the system factor first: index j*dim_B + b.
"""

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Tuple

import numpy as np
import scipy.linalg

from backend.quantum.errors import (
    BasisNotOrthonormal,
    BranchAmbiguity,
    DimensionMismatch,
    InvalidDensity,
    NonHermitianInput,
    NonUnitaryInput,
    NotNormalized,
    NotPureInitial,
)

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
TRACE_TOL = 1e-10
BRANCH_MARGIN = 1e-6
NORM_TOL = 1e-10
PURITY_TOL = 1e-9

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class SpectralData:
    """Eigendecomposition of a Hermitian operator (eigenvalues ascending)"""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    operator_norm: float

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


# ---------------------------------------------------------------------------
# Role checks
# ---------------------------------------------------------------------------

def as_operator(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {A.shape}")
    return A


def is_hermitian(A: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = np.max(np.abs(A)) if A.size else 0.0
    return np.max(np.abs(A - A.conj().T), initial=0.0) <= tol * scale


def check_hermitian(A, name: str = "operator") -> np.ndarray:
    A = as_operator(A)
    if not is_hermitian(A):
        deviation = np.max(np.abs(A - A.conj().T))
        raise NonHermitianInput(f"{name} is not Hermitian (max |A - A^dag| = {deviation:.3e})")
    return A


def check_unitary(U, name: str = "operator") -> np.ndarray:
    U = as_operator(U)
    deviation = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if deviation > UNITARY_TOL:
        raise NonUnitaryInput(f"{name} is not unitary (max |U^dag U - I| = {deviation:.3e})")
    return U


def check_density(rho, name: str = "density matrix") -> np.ndarray:
    rho = as_operator(rho)
    if not is_hermitian(rho):
        raise InvalidDensity(f"{name} is not Hermitian")
    trace = np.trace(rho).real
    if abs(trace - 1.0) > TRACE_TOL:
        raise InvalidDensity(f"{name} has trace {trace!r}")
    smallest = scipy.linalg.eigvalsh(rho)[0]
    if smallest < -TRACE_TOL:
        raise InvalidDensity(f"{name} has negative eigenvalue {smallest:.3e}")
    return rho


def check_normalized(psi, name: str = "state") -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise NotNormalized(f"{name} has norm {norm!r}")
    return psi


def check_orthonormal(basis: Iterable, dim: int = None) -> np.ndarray:
    """Stack states as columns and verify orthonormality"""
    columns = [np.asarray(v, dtype=complex).reshape(-1) for v in basis]
    if not columns:
        raise BasisNotOrthonormal("basis is empty")
    if dim is not None and any(c.shape[0] != dim for c in columns):
        raise DimensionMismatch(f"basis vectors must have dimension {dim}")
    B = np.column_stack(columns)
    gram = B.conj().T @ B
    deviation = np.max(np.abs(gram - np.eye(B.shape[1])))
    if deviation > NORM_TOL:
        raise BasisNotOrthonormal(f"basis Gram matrix deviates from I by {deviation:.3e}")
    return B


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------

def tensor(A, B) -> np.ndarray:
    return np.kron(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex))


def tensor_all(*ops) -> np.ndarray:
    return reduce(tensor, ops)


def lift(P: np.ndarray, dim_B: int) -> np.ndarray:
    """P ⊗ I_B"""
    if dim_B == 1:
        return np.asarray(P, dtype=complex)
    return np.kron(P, np.eye(dim_B, dtype=complex))


def operator_norm(A) -> float:
    A = np.asarray(A, dtype=complex)
    if not A.size or not np.any(A):
        return 0.0
    return float(np.linalg.norm(A, 2))


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def reunitarize(U: np.ndarray) -> np.ndarray:
    """Closest unitary (or isometry, for tall input) via the polar factor"""
    unitary, _ = scipy.linalg.polar(U)
    return unitary


def equal_up_to_phase(A, B, tol: float = 1e-9) -> bool:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        return False
    inner = np.vdot(A, B)
    if abs(inner) == 0.0:
        return bool(np.max(np.abs(A - B), initial=0.0) <= tol)
    phase = inner / abs(inner)
    scale = max(1.0, float(np.max(np.abs(B))))
    return bool(np.max(np.abs(A * phase - B)) <= tol * scale)


def commutator(A, B) -> np.ndarray:
    return A @ B - B @ A


# ---------------------------------------------------------------------------
# Spectral machinery
# ---------------------------------------------------------------------------

def spectral(A) -> SpectralData:
    """
    Full eigendecomposition of a Hermitian operator.

    Eigenvalues come back ascending in solver order. Each eigenvector is
    phase-fixed so that its largest-magnitude component (first one on ties)
    is real and positive.
    """
    A = check_hermitian(A)
    eigenvalues, V = scipy.linalg.eigh(A)
    pivots = np.argmax(np.abs(V), axis=0)
    phases = V[pivots, np.arange(V.shape[1])]
    V = V * (np.abs(phases) / phases)
    norm = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return SpectralData(eigenvalues=eigenvalues, eigenvectors=V, operator_norm=norm)


def propagator_from_spectral(data: SpectralData, t: float) -> np.ndarray:
    V = data.eigenvectors
    return (V * np.exp(-1j * data.eigenvalues * t)) @ V.conj().T


def evolve_propagator(H, t: float) -> np.ndarray:
    """U = exp(-i H t) via the Hermitian eigendecomposition"""
    return propagator_from_spectral(spectral(H), t)


def principal_log_hamiltonian(U, T_c: float) -> np.ndarray:
    """
    Hermitian H with exp(-i T_c H) = U on the principal branch.

    Raises:
        BranchAmbiguity: an eigenphase lies within BRANCH_MARGIN of ±π
    """
    if T_c <= 0:
        raise ValueError("T_c must be positive")
    U = check_unitary(U, "cycle propagator")
    T, Z = scipy.linalg.schur(U, output="complex")
    phases = np.angle(np.diag(T))
    worst = np.max(np.abs(phases))
    if worst > np.pi - BRANCH_MARGIN:
        raise BranchAmbiguity(f"eigenphase {worst:.9f} is within {BRANCH_MARGIN} of the branch cut")
    H = (Z * (-phases / T_c)) @ Z.conj().T
    return 0.5 * (H + H.conj().T)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

def partial_trace_bath(rho, dim_S: int, dim_B: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim_S * dim_B, dim_S * dim_B):
        raise DimensionMismatch(
            f"density matrix of shape {rho.shape} does not factor as {dim_S} x {dim_B}"
        )
    return np.einsum("ibjb->ij", rho.reshape(dim_S, dim_B, dim_S, dim_B))


def partial_trace_system(op, dim_S: int, dim_B: int) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape != (dim_S * dim_B, dim_S * dim_B):
        raise DimensionMismatch(f"operator of shape {op.shape} does not factor as {dim_S} x {dim_B}")
    return np.einsum("ibic->bc", op.reshape(dim_S, dim_B, dim_S, dim_B))


def _trace_product(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.sum(A * B.T).real)


def state_metrics(rho_S_initial, rho_S_now) -> Tuple[float, float]:
    """
    Fidelity Tr[rho0 rho] and purity Tr[rho^2] of the reduced system state.

    Returns:
        (fidelity, purity), clamped to [0, 1] and [1/dim, 1]
    """
    rho0 = np.asarray(rho_S_initial, dtype=complex)
    rho = np.asarray(rho_S_now, dtype=complex)
    if rho0.shape != rho.shape:
        raise DimensionMismatch(f"state shapes differ: {rho0.shape} vs {rho.shape}")
    initial_purity = _trace_product(rho0, rho0)
    if initial_purity < 1.0 - PURITY_TOL:
        raise NotPureInitial(f"initial state purity {initial_purity!r} is below 1")
    fidelity = min(max(_trace_product(rho0, rho), 0.0), 1.0)
    purity = min(max(_trace_product(rho, rho), 1.0 / rho.shape[0]), 1.0)
    return fidelity, purity
