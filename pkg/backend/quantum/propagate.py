"""
Stroboscopic propagation of system+bath density matrices.

run_stroboscopic never forms rho explicitly after the start: rho(0) is
factored as Y diag(w) Y^dag with Y an isometry, and each cycle applies
Y <- U_c Y, which is the same conjugation rho -> U_c rho U_c^dag at a
fraction of the cost when the bath starts fully mixed.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from backend.quantum.errors import DimensionMismatch, EmptyTrajectory, InvalidDensity
from backend.quantum.linalg_core import (
    check_density,
    check_hermitian,
    check_unitary,
    lift,
    partial_trace_bath,
    reunitarize,
    propagator_from_spectral,
    spectral,
    state_metrics,
)
from backend.quantum.pulses import PulseSequence

log = logging.getLogger(__name__)

REUNITARIZE_EVERY = 256
LOSS_FLOOR = 1e-15
DEFAULT_WINDOW_FRACTION = 0.5
DEFAULT_F_MIN = 0.5
_RANK_CUTOFF = 1e-14


@dataclass
class Trajectory:
    cycle_indices: List[int]
    times: List[float]
    fidelity: List[float]
    purity: List[float]
    state_label: str = ""
    metadata: Dict = field(default_factory=dict)
    reduced_states: Optional[List[np.ndarray]] = None

    def __len__(self) -> int:
        return len(self.cycle_indices)

    @property
    def loss(self) -> np.ndarray:
        return 1.0 - np.asarray(self.fidelity)


@dataclass(frozen=True)
class TrajectoryStats:
    saturation_mean: float
    saturation_spread: float
    relative_survival: float
    secular_slope: float

    @property
    def saturation_loss(self) -> float:
        return 1.0 - self.saturation_mean


def cycle_propagator(seq: PulseSequence, H0) -> np.ndarray:
    """
    U_c = P_n exp(-i tau_n H0) ... P_1 exp(-i tau_1 H0), pulses lifted as P ⊗ I_B.

    The closure phase of the ideal cycle is divided out, so an ideal closed
    cycle at H0 = 0 gives exactly I.
    """
    H0 = check_hermitian(H0, "H0")
    dim = H0.shape[0]
    if dim % seq.dim_S:
        raise DimensionMismatch(f"system dimension {seq.dim_S} does not divide H0 dimension {dim}")
    dim_B = dim // seq.dim_S
    data = spectral(H0)
    free_cache = {}
    U = np.eye(dim, dtype=complex)
    for segment in seq.segments:
        F = free_cache.get(segment.tau)
        if F is None:
            F = propagator_from_spectral(data, segment.tau)
            free_cache[segment.tau] = F
        P = segment.unitary
        if P.shape[0] == seq.dim_S:
            P = lift(P, dim_B)
        elif P.shape[0] != dim:
            raise DimensionMismatch(f"pulse of dimension {P.shape[0]} does not fit H0 dimension {dim}")
        U = P @ (F @ U)
    return U * np.conj(seq.phase)


def _validate_schedule(schedule: Sequence[int]) -> List[int]:
    indices = [int(n) for n in schedule]
    if not indices:
        raise EmptyTrajectory("sampling schedule is empty")
    if indices[0] < 0 or any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError("schedule must be strictly increasing and nonnegative")
    return indices


def _factor_density(rho0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """rho0 = Y diag(w) Y^dag keeping only the support"""
    weights, vectors = scipy.linalg.eigh(rho0)
    keep = weights > _RANK_CUTOFF * max(weights[-1], 1.0)
    return vectors[:, keep], weights[keep]


def _reduced(Y: np.ndarray, weights: np.ndarray, dim_S: int, dim_B: int) -> np.ndarray:
    blocks = Y.reshape(dim_S, dim_B, -1)
    return np.einsum("ibr,jbr,r->ij", blocks, blocks.conj(), weights)


def run_stroboscopic(
    U_c,
    rho0,
    schedule: Sequence[int],
    dims: Tuple[int, int],
    T_c: float = 1.0,
    state_label: str = "",
    metadata: Optional[Dict] = None,
    keep_states: bool = False,
    reunitarize_every: int = REUNITARIZE_EVERY,
) -> Trajectory:
    """
    Evolve rho0 one cycle at a time and sample the reduced system state.

    Args:
        U_c: cycle propagator on the full space
        rho0: initial system+bath density matrix
        schedule: strictly increasing cycle indices to record
        dims: (dim_S, dim_B)
        T_c: cycle duration, used for the time axis
        keep_states: also return the reduced density matrices

    Returns:
        Trajectory with fidelity and purity against the initial reduced state
    """
    dim_S, dim_B = dims
    U = check_unitary(U_c, "cycle propagator")
    rho0 = check_density(rho0, "initial state")
    if U.shape != rho0.shape or U.shape[0] != dim_S * dim_B:
        raise DimensionMismatch(f"U_c {U.shape} and rho0 {rho0.shape} do not match dims {dims}")
    indices = _validate_schedule(schedule)

    rho_S0 = partial_trace_bath(rho0, dim_S, dim_B)
    Y, weights = _factor_density(rho0)

    fidelity, purity, states = [], [], []
    n = 0
    for target in indices:
        while n < target:
            Y = U @ Y
            n += 1
            if n % reunitarize_every == 0:
                Y = reunitarize(Y)
        rho_S = _reduced(Y, weights, dim_S, dim_B)
        f, p = state_metrics(rho_S0, rho_S)
        fidelity.append(f)
        purity.append(p)
        if keep_states:
            states.append(rho_S)

    info = {'N_total': indices[-1]}
    info.update(metadata or {})
    log.debug(f"{state_label or 'state'}: {indices[-1]} cycles, final fidelity {fidelity[-1]:.6f}")
    return Trajectory(
        cycle_indices=indices,
        times=[i * T_c for i in indices],
        fidelity=fidelity,
        purity=purity,
        state_label=state_label,
        metadata=info,
        reduced_states=states if keep_states else None,
    )


def trajectory_stats(
    traj: Trajectory,
    window_fraction: float = DEFAULT_WINDOW_FRACTION,
    f_min: float = DEFAULT_F_MIN,
) -> TrajectoryStats:
    """Saturation mean/spread, relative survival and secular slope over the final window"""
    n = len(traj.fidelity)
    if n == 0:
        raise EmptyTrajectory("trajectory has no samples")
    if not 0 < window_fraction <= 1:
        raise ValueError(f"window_fraction must lie in (0, 1], got {window_fraction}")
    k = max(1, math.ceil(window_fraction * n))
    f = np.asarray(traj.fidelity[-k:], dtype=float)
    t = np.asarray(traj.times[-k:], dtype=float)

    mean = min(max(float(np.mean(f)), 0.0), 1.0)
    spread = float(np.max(f) - np.min(f))
    loss = 1.0 - mean
    survival = math.inf if loss <= LOSS_FLOOR else (1.0 - f_min) / loss
    slope = float(np.polyfit(t, f, 1)[0]) if k >= 2 and np.ptp(t) > 0 else 0.0
    return TrajectoryStats(
        saturation_mean=mean,
        saturation_spread=spread,
        relative_survival=survival,
        secular_slope=slope,
    )


def log_schedule(count: int, N_max: int) -> List[int]:
    """0 plus about count-1 log-spaced cycle indices up to N_max (duplicates merged)"""
    if N_max <= 0:
        return [0]
    if count < 2:
        return [0, int(N_max)]
    points = np.unique(np.rint(np.geomspace(1, N_max, count - 1)).astype(int))
    return [0] + points.tolist()


# ---------------------------------------------------------------------------
# Preparation errors
# ---------------------------------------------------------------------------

def misprepared_state(delta: float, A: float, B: float, C: float) -> np.ndarray:
    """[[1 - dA, d(B + iC)], [d(B - iC), dA]], validated as a density matrix"""
    a = delta * A
    off = delta * complex(B, C)
    if not 0.0 <= a <= 1.0:
        raise InvalidDensity(f"delta*A = {a} must lie in [0, 1]")
    if a * (1.0 - a) - abs(off) ** 2 < -1e-15:
        raise InvalidDensity("misprepared state is not positive (delta^2 (B^2 + C^2) > dA (1 - dA))")
    return np.array([[1.0 - a, off], [np.conj(off), a]], dtype=complex)


def dephased_state(rho0) -> np.ndarray:
    """Long-time state of the perfectly dephasing pointer channel"""
    return np.diag(np.diag(np.asarray(rho0, dtype=complex)))


def exact_dephasing_loss(delta: float, A: float, B: float, C: float) -> float:
    """
    1 - Tr|sqrt(rho0) sqrt(rho_inf)| between the misprepared state and its
    dephased limit (qubit closed form of the root fidelity).
    """
    rho0 = misprepared_state(delta, A, B, C)
    rho_inf = dephased_state(rho0)
    overlap = float(np.sum(rho0 * rho_inf.T).real)
    dets = float(np.linalg.det(rho0).real) * float(np.linalg.det(rho_inf).real)
    root_fidelity = math.sqrt(max(overlap + 2.0 * math.sqrt(max(dets, 0.0)), 0.0))
    return 1.0 - min(root_fidelity, 1.0)


def misprepared_asymptotics(delta: float, A: float, B: float, C: float) -> float:
    """Leading-order long-time loss 1/2 delta^2 (B^2 + C^2)"""
    misprepared_state(delta, A, B, C)
    return 0.5 * delta ** 2 * (B ** 2 + C ** 2)
