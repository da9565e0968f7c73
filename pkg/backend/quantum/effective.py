"""
Effective cycle Hamiltonians and pointer-state analysis.

The cycle Hamiltonian H_c is split against a designated pointer basis as

    H_c = H_dom + H_bath + H_per
    H_bath = I_S ⊗ Tr_S[H_c] / D_S
    H_dom  = sum_j |j><j| ⊗ B_j + H'      (H' lives on the complement)

H_per carries everything that moves population between pointer sectors.
Its norm eps_norm and the sector gaps of H_dom + H_bath feed the fidelity
bounds.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from backend.quantum.errors import BadP, DimensionMismatch, RegimeViolation, ZeroGap
from backend.quantum.linalg_core import (
    check_hermitian,
    check_orthonormal,
    check_unitary,
    lift,
    operator_norm,
    partial_trace_system,
    principal_log_hamiltonian,
    spectral,
)
from backend.quantum.pulses import PulseSequence, toggling_frames

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9
PHASE_DEGENERACY_TOL = 1e-12
RESONANCE_TOL = 1e-9


# ---------------------------------------------------------------------------
# Cycle Hamiltonians
# ---------------------------------------------------------------------------

def conjugate_system(Q: np.ndarray, H: np.ndarray, dim_S: int) -> np.ndarray:
    """(Q ⊗ I)^dag H (Q ⊗ I) without forming the Kronecker product"""
    dim = H.shape[0]
    if Q.shape[0] == dim:
        return Q.conj().T @ H @ Q
    dim_B = dim // dim_S
    H4 = H.reshape(dim_S, dim_B, dim_S, dim_B)
    out = np.einsum("ia,ibjc,jd->abdc", Q.conj(), H4, Q, optimize=True)
    return out.reshape(dim, dim)


def magnus_first_order(seq: PulseSequence, H0) -> np.ndarray:
    """(1/T_c) sum_j tau_j Q_j^dag H0 Q_j"""
    H0 = check_hermitian(H0, "H0")
    if H0.shape[0] % seq.dim_S:
        raise DimensionMismatch(f"system dimension {seq.dim_S} does not divide H0 dimension {H0.shape[0]}")
    total = np.zeros_like(H0)
    for tau, Q in toggling_frames(seq):
        total += tau * conjugate_system(Q, H0, seq.dim_S)
    total /= seq.T_c
    return 0.5 * (total + total.conj().T)


def exact_cycle_hamiltonian(U_c, T_c: float) -> np.ndarray:
    """Principal-branch H_c with exp(-i T_c H_c) = U_c"""
    return principal_log_hamiltonian(U_c, T_c)


def magnus_residual(seq: PulseSequence, H0, U_c: Optional[np.ndarray] = None) -> float:
    """||H_c(exact) - H_c(first order)||"""
    from backend.quantum.propagate import cycle_propagator

    if U_c is None:
        U_c = cycle_propagator(seq, H0)
    exact = exact_cycle_hamiltonian(U_c, seq.T_c)
    return operator_norm(exact - magnus_first_order(seq, H0))


def single_pulse_error_term(seq: PulseSequence, E) -> np.ndarray:
    """sum_j Q_j^dag E Q_j for a cycle using one pulse type with error action E"""
    E = check_hermitian(E, "error action")
    total = np.zeros_like(E)
    for _, Q in toggling_frames(seq):
        total += conjugate_system(Q, E, seq.dim_S)
    return total


# ---------------------------------------------------------------------------
# Pointer-state decomposition
# ---------------------------------------------------------------------------

@dataclass
class EffectiveDecomposition:
    H_c: np.ndarray
    H_dom: np.ndarray
    H_bath: np.ndarray
    H_per: np.ndarray
    H_prime: np.ndarray
    B_blocks: List[np.ndarray]
    eps_norm: float
    gap_Delta: float
    gap_Delta_0: float
    dims: Tuple[int, int]
    p: int
    monitored: int = 0
    basis: Optional[np.ndarray] = None
    sector_energies: Dict[int, np.ndarray] = field(default_factory=dict)
    unassigned: int = 0

    @property
    def H_unperturbed(self) -> np.ndarray:
        return self.H_dom + self.H_bath

    def summary(self) -> Dict:
        return {
            'dims': list(self.dims),
            'p': self.p,
            'monitored': self.monitored,
            'norm_H_c': operator_norm(self.H_c),
            'norm_H_dom': operator_norm(self.H_dom),
            'norm_H_bath': operator_norm(self.H_bath),
            'eps_norm': self.eps_norm,
            'gap_Delta': self.gap_Delta,
            'gap_Delta_0': self.gap_Delta_0,
            'B_norms': [operator_norm(B) for B in self.B_blocks],
            'unassigned_levels': self.unassigned,
        }


def _sector_projectors(designated: np.ndarray, dim_S: int) -> List[np.ndarray]:
    projectors = [np.outer(v, v.conj()) for v in designated.T]
    if designated.shape[1] < dim_S:
        projectors.append(np.eye(dim_S, dtype=complex) - designated @ designated.conj().T)
    return projectors


def _sector_levels(H_unpert: np.ndarray, projectors: List[np.ndarray], dims: Tuple[int, int], tol: float):
    """
    Energies per sector from degenerate clusters of H_dom + H_bath.

    A cluster contributes its energy to every sector holding more than half
    a state of its spectral projector, so a level shared by two sectors
    produces a zero gap. Weight left over is counted as unassigned.
    """
    dim_S, dim_B = dims
    data = spectral(H_unpert)
    values = data.eigenvalues
    V3 = data.eigenvectors.reshape(dim_S, dim_B, -1)
    weights = np.array([
        np.sum(np.abs(np.einsum("ij,jbk->ibk", P, V3)) ** 2, axis=(0, 1)) for P in projectors
    ])

    levels = {s: [] for s in range(len(projectors))}
    unassigned = 0
    start = 0
    for stop in range(1, len(values) + 1):
        if stop < len(values) and values[stop] - values[stop - 1] <= tol:
            continue
        cluster_weight = weights[:, start:stop].sum(axis=1)
        energy = float(np.mean(values[start:stop]))
        assigned = 0
        for s, w in enumerate(cluster_weight):
            if w > 0.5:
                levels[s].append(energy)
                assigned += int(round(w))
        unassigned += max(0, (stop - start) - assigned)
        start = stop
    if unassigned:
        log.warning(f"{unassigned} eigenvector(s) of H_dom + H_bath have no dominant pointer sector; excluded from gaps")
    return {s: np.asarray(e) for s, e in levels.items()}, unassigned


def _min_gap(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0 or b.size == 0:
        return math.inf
    return float(np.min(np.abs(np.subtract.outer(a, b))))


def ps_decompose(H_c, ps_basis: Sequence, p: int, dims: Tuple[int, int], monitored: int = 0) -> EffectiveDecomposition:
    """
    Split H_c against the first p states of ps_basis.

    Args:
        H_c: cycle Hamiltonian on the full space
        ps_basis: orthonormal system states, designated ones first
        p: number of designated states (1..D_S-1, or D_S for a complete basis)
        dims: (dim_S, dim_B)
        monitored: index of the pointer state whose gap Delta_0 is reported

    Returns:
        EffectiveDecomposition
    """
    dim_S, dim_B = dims
    H = check_hermitian(H_c, "H_c")
    if H.shape[0] != dim_S * dim_B:
        raise DimensionMismatch(f"H_c of dimension {H.shape[0]} does not factor as {dim_S} x {dim_B}")
    basis = check_orthonormal(ps_basis, dim=dim_S)
    if not (1 <= p <= dim_S - 1 or p == dim_S) or basis.shape[1] < p:
        raise BadP(f"p = {p} is not valid for D_S = {dim_S} with {basis.shape[1]} basis states")
    if not 0 <= monitored < p:
        raise BadP(f"monitored index {monitored} is not a designated pointer state")
    designated = basis[:, :p]

    H_bath = np.kron(np.eye(dim_S), partial_trace_system(H, dim_S, dim_B) / dim_S)
    rest = H - H_bath
    H4 = rest.reshape(dim_S, dim_B, dim_S, dim_B)
    B_blocks = [np.einsum("i,ibjc,j->bc", v.conj(), H4, v) for v in designated.T]

    H_ps = sum(np.kron(np.outer(v, v.conj()), B) for v, B in zip(designated.T, B_blocks))
    if p < dim_S:
        complement = lift(np.eye(dim_S) - designated @ designated.conj().T, dim_B)
        H_prime = complement @ rest @ complement
    else:
        H_prime = np.zeros_like(H)
    H_dom = H_ps + H_prime
    H_per = rest - H_dom
    H_per = 0.5 * (H_per + H_per.conj().T)

    tol = DEGENERACY_TOL * max(operator_norm(H), np.finfo(float).tiny)
    projectors = _sector_projectors(designated, dim_S)
    levels, unassigned = _sector_levels(H_dom + H_bath, projectors, dims, tol)

    sectors = list(levels)
    gap = math.inf
    gap_0 = math.inf
    for i, s1 in enumerate(sectors):
        for s2 in sectors[i + 1:]:
            g = _min_gap(levels[s1], levels[s2])
            gap = min(gap, g)
            if monitored in (s1, s2):
                gap_0 = min(gap_0, g)

    return EffectiveDecomposition(
        H_c=H,
        H_dom=H_dom,
        H_bath=H_bath,
        H_per=H_per,
        H_prime=H_prime,
        B_blocks=B_blocks,
        eps_norm=operator_norm(H_per),
        gap_Delta=gap,
        gap_Delta_0=gap_0,
        dims=dims,
        p=p,
        monitored=monitored,
        basis=basis,
        sector_energies=levels,
        unassigned=unassigned,
    )


# ---------------------------------------------------------------------------
# Mean ergodic averaging
# ---------------------------------------------------------------------------

def met_time_average(E, U_D, N: int) -> np.ndarray:
    """
    (1/N) sum_{n=0}^{N-1} U_D^-n E U_D^n in closed form.

    In the eigenbasis of U_D each element picks up the geometric factor
    (1 - z^N) / (N (1 - z)) with z the ratio of the two eigenphases;
    elements with z = 1 (commutant) pass through unchanged.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    E = np.asarray(E, dtype=complex)
    U = check_unitary(U_D, "U_D")
    if E.shape != U.shape:
        raise DimensionMismatch(f"E {E.shape} and U_D {U.shape} differ in shape")
    T, Z = scipy.linalg.schur(U, output="complex")
    phases = np.angle(np.diag(T))
    theta = np.angle(np.exp(1j * (phases[None, :] - phases[:, None])))
    z = np.exp(1j * theta)
    denominator = 1.0 - z
    resonant = np.abs(denominator) < PHASE_DEGENERACY_TOL
    factor = np.ones_like(z)
    safe = ~resonant
    factor[safe] = (1.0 - np.exp(1j * N * theta[safe])) / (N * denominator[safe])
    E_eig = Z.conj().T @ E @ Z
    return Z @ (E_eig * factor) @ Z.conj().T


def commutant_projection(E, U_D) -> np.ndarray:
    """N -> infinity limit of met_time_average"""
    E = np.asarray(E, dtype=complex)
    U = check_unitary(U_D, "U_D")
    T, Z = scipy.linalg.schur(U, output="complex")
    phases = np.angle(np.diag(T))
    z = np.exp(1j * (phases[None, :] - phases[:, None]))
    keep = np.abs(1.0 - z) < PHASE_DEGENERACY_TOL
    E_eig = Z.conj().T @ E @ Z
    return Z @ np.where(keep, E_eig, 0.0) @ Z.conj().T


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidityThresholds:
    """Numeric stand-ins for the asymptotic '<<' and '>>' conditions"""
    cond_b1: float = 0.1
    cond_b3_factor: float = 10.0
    met_factor: float = 10.0

    @classmethod
    def from_config(cls) -> "ValidityThresholds":
        from config.simulation_config import get_simulation_config

        config = get_simulation_config()
        return cls(
            cond_b1=float(config.get('validity.cond_b1', cls.cond_b1)),
            cond_b3_factor=float(config.get('validity.cond_b3_factor', cls.cond_b3_factor)),
            met_factor=float(config.get('validity.met_factor', cls.met_factor)),
        )


@dataclass(frozen=True)
class BoundReport:
    quantum_bound: float
    semiclassical_bound: Optional[float]
    cond_B1: bool
    cond_B3: bool
    T_met: float
    met_valid: bool
    eps_norm: float
    gap_Delta: float
    gap_Delta_0: float
    T_c: float
    T_total: float

    @property
    def all_valid(self) -> bool:
        return self.cond_B1 and self.cond_B3 and self.met_valid

    def to_dict(self) -> Dict:
        return {
            'quantum_bound': self.quantum_bound,
            'semiclassical_bound': self.semiclassical_bound,
            'cond_B1': self.cond_B1,
            'cond_B3': self.cond_B3,
            'T_met': self.T_met,
            'met_valid': self.met_valid,
            'eps_norm': self.eps_norm,
            'gap_Delta': self.gap_Delta,
            'gap_Delta_0': self.gap_Delta_0,
            'T_c': self.T_c,
            'T_total': self.T_total,
        }


def _clamp(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def _semiclassical_bound(decomp: EffectiveDecomposition) -> float:
    """1 - 4 D_S max_j |<0|H_per|j>|^2 / omega_j^2 over the unperturbed levels"""
    dim_S = decomp.dims[0]
    data = spectral(decomp.H_unperturbed)
    V = data.eigenvectors
    target = decomp.basis[:, decomp.monitored]
    anchor = int(np.argmax(np.abs(target.conj() @ V) ** 2))
    elements = V.conj().T @ decomp.H_per @ V
    worst = 0.0
    for j in range(dim_S):
        if j == anchor:
            continue
        omega = data.eigenvalues[anchor] - data.eigenvalues[j]
        amplitude = abs(elements[anchor, j]) ** 2
        if amplitude == 0.0:
            continue
        worst = max(worst, amplitude / omega ** 2)
    return _clamp(1.0 - 4.0 * dim_S * worst)


def ps_fidelity_bounds(
    decomp: EffectiveDecomposition,
    T_c: float,
    T_total: float,
    thresholds: Optional[ValidityThresholds] = None,
) -> BoundReport:
    """
    Long-time fidelity bounds for the monitored pointer state.

    Raises:
        ZeroGap: the monitored sector is degenerate with another one, or
            T_c * gap_Delta_0 is resonant with a multiple of 2 pi
    """
    thresholds = thresholds or ValidityThresholds()
    tol = DEGENERACY_TOL * max(operator_norm(decomp.H_c), np.finfo(float).tiny)
    gap_0 = decomp.gap_Delta_0
    if not gap_0 > tol:
        raise ZeroGap(f"gap_Delta_0 = {gap_0:.3e}: pointer sectors are degenerate, desymmetrize the cycle")
    x = T_c * gap_0
    if math.isfinite(x) and abs(x - 2.0 * math.pi * round(x / (2.0 * math.pi))) < RESONANCE_TOL:
        raise ZeroGap(f"T_c * gap_Delta_0 = {x:.12f} is resonant with a multiple of 2 pi")

    eps = decomp.eps_norm
    if eps == 0.0:
        quantum = 1.0
    else:
        quantum = _clamp(1.0 - eps * T_c / abs(math.sin(x / 2.0))) if math.isfinite(x) else 1.0
    semiclassical = _semiclassical_bound(decomp) if decomp.dims[1] == 1 else None

    gap = decomp.gap_Delta
    T_met = 1.0 / gap if gap > 0 else math.inf
    return BoundReport(
        quantum_bound=quantum,
        semiclassical_bound=semiclassical,
        cond_B1=eps * T_total < thresholds.cond_b1,
        cond_B3=gap > thresholds.cond_b3_factor * eps,
        T_met=T_met,
        met_valid=T_total * gap > thresholds.met_factor,
        eps_norm=eps,
        gap_Delta=gap,
        gap_Delta_0=gap_0,
        T_c=T_c,
        T_total=T_total,
    )


def initial_decay_bound(delta: float, N: int) -> float:
    """Short-time loss bound (e - 1) N delta, valid while N delta <= 1"""
    if delta < 0 or N < 0:
        raise ValueError("delta and N must be nonnegative")
    if N * delta > 1.0:
        raise RegimeViolation(f"N*delta = {N * delta:.4g} exceeds 1; use the long-time bounds instead")
    return (math.e - 1.0) * N * delta
