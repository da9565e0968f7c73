"""
Semiclassical qubit ensembles and the ESR imperfect-pulse cycles.

A nuclear-spin bath seen by a single qubit is replaced by a static random
field b, so the system+bath problem reduces to a 2x2 rotation per
realization: H_SB = b·S = (1/2) b·σ. Every cycle propagator of a qubit
sequence is then an SU(2) rotation (up to phase), and the fidelity of a
pure state after N cycles follows from the rotation axis and angle without
stepping through the cycles.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.integrate
from joblib import Parallel, delayed

from backend.quantum.errors import DimensionMismatch, UnknownName, ZeroSplitting
from backend.quantum.linalg_core import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    PAULIS,
    check_normalized,
    evolve_propagator,
    principal_log_hamiltonian,
)
from backend.quantum.propagate import Trajectory, cycle_propagator
from backend.quantum.pulses import PulseSequence, named_qubit_cycle, substitute_pulses
from backend.quantum.randomness import stream

log = logging.getLogger(__name__)

DISTRIBUTIONS = ("isotropic-gaussian", "gaussian-magnitude", "fixed-vector")
SPLITTING_TOL = 1e-12
ESR_WARN_THRESHOLD = 0.2
CHUNK_SIZE = 4096

_PAULI_STACK = np.stack(PAULIS)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def realization_fidelity(h_x: float, h_y: float, h_z: float, eps: float, N: int, T_c: float) -> float:
    """
    f_N = 1 - eps^2 (h_x^2 + h_y^2) sin^2(N T_c h_z) / (4 h_z^2)

    This is the leading-order fidelity of |0> under the cycle Hamiltonian
    h_z σz + (eps/2)(h_x σx + h_y σy).

    Raises:
        ZeroSplitting: |h_z| <= 1e-12
    """
    if abs(h_z) <= SPLITTING_TOL:
        raise ZeroSplitting(f"h_z = {h_z!r} is too small for the perturbative fidelity")
    loss = eps ** 2 * (h_x ** 2 + h_y ** 2) * math.sin(N * T_c * h_z) ** 2 / (4.0 * h_z ** 2)
    return min(max(1.0 - loss, 0.0), 1.0)


def zz_field_functionals(b: Sequence[float], tau: float) -> Dict[str, float]:
    """
    h-functionals of the ZZ cycle for a static field b (H = (1/2) b·σ).

    Up to second order the ZZ cycle Hamiltonian is
    (b_z/2) σz - (tau/4) b_z (b_y σx - b_x σy); the transverse part is
    returned with eps = 1 so the result plugs into realization_fidelity.
    """
    b_x, b_y, b_z = (float(v) for v in b)
    return {
        'h_x': -0.5 * tau * b_z * b_y,
        'h_y': 0.5 * tau * b_z * b_x,
        'h_z': 0.5 * b_z,
        'eps': 1.0,
        'T_c': 2.0 * tau,
    }


def asymptotic_forms(B: float, tau: float, N: int, A: Optional[float] = None, n_B: Optional[int] = None) -> Dict:
    """Short-time loss (2/5) B^4 N^2 tau^4, plateau B^2 tau^2 / 12 and B^2 = (3/4) A^2 n_B"""
    for name, value in (('B', B), ('tau', tau), ('N', N), ('A', A), ('n_B', n_B)):
        if value is not None and value < 0:
            raise ValueError(f"{name} must be nonnegative, got {value}")
    return {
        'short_time_loss': 0.4 * B ** 4 * N ** 2 * tau ** 4,
        'plateau_loss': B ** 2 * tau ** 2 / 12.0,
        'B_sq_from_bath': None if A is None or n_B is None else 0.75 * A ** 2 * n_B,
    }


def _direction_average(w: float) -> float:
    """<sin^2(theta) sin^2((w/2) cos(theta))> over the sphere"""
    if w < 1e-2:
        return w ** 2 / 30.0 - w ** 4 / 840.0
    return 1.0 / 3.0 - (math.sin(w) - w * math.cos(w)) / w ** 3


def _magnitude_density(distribution: str, B: float):
    if distribution == "isotropic-gaussian":
        sigma = B / math.sqrt(3.0)
        norm = math.sqrt(2.0 / math.pi) / sigma ** 3
        return lambda r: norm * r ** 2 * math.exp(-0.5 * (r / sigma) ** 2)
    if distribution == "gaussian-magnitude":
        norm = math.sqrt(2.0 / math.pi) / B
        return lambda r: norm * math.exp(-0.5 * (r / B) ** 2)
    raise ValueError(f"no closed form for distribution '{distribution}'")


def closed_form_ensemble_loss(B: float, tau: float, N: int, distribution: str = "isotropic-gaussian") -> float:
    """
    ZZ ensemble loss of |0> averaged analytically over the field ensemble,
    (tau^2/4) ∫ p(r) r^2 g(2 N tau r) dr with g the direction average.

    Tends to B^2 tau^2 / 12 at long times for both gaussian conventions.
    """
    if B <= 0 or tau <= 0:
        raise ValueError("B and tau must be positive")
    if N == 0:
        return 0.0
    density = _magnitude_density(distribution, B)
    value, _ = scipy.integrate.quad(
        lambda r: density(r) * r ** 2 * _direction_average(2.0 * N * tau * r),
        0.0,
        12.0 * B,
        epsabs=0.0,
        epsrel=1e-9,
        limit=400,
    )
    return 0.25 * tau ** 2 * value


def short_time_coefficient(distribution: str = "isotropic-gaussian") -> float:
    """
    c in loss ≈ c B^4 N^2 tau^4 for the ZZ ensemble: 1/18 isotropic, 1/10
    for a gaussian magnitude. The 2/5 of asymptotic_forms is a looser bound.
    """
    # <r^4> / 30: 5/3 B^4 for Maxwell components, 3 B^4 for a half-normal magnitude
    if distribution == "isotropic-gaussian":
        return 1.0 / 18.0
    if distribution == "gaussian-magnitude":
        return 1.0 / 10.0
    raise ValueError(f"no short-time law for distribution '{distribution}'")


# ---------------------------------------------------------------------------
# Random-field ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RandomFieldSpec:
    distribution: str = "isotropic-gaussian"
    B: float = 1.0
    vector: Optional[Tuple[float, float, float]] = None
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise UnknownName(f"unknown field distribution '{self.distribution}' (expected one of {DISTRIBUTIONS})")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.distribution == "fixed-vector":
            if self.vector is None or len(self.vector) != 3 or not np.all(np.isfinite(self.vector)):
                raise ValueError("fixed-vector distribution needs a finite 3-vector")
            object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        elif not self.B > 0:
            raise ValueError(f"B must be positive, got {self.B}")

    def to_dict(self) -> Dict:
        return {
            'distribution': self.distribution,
            'B': self.B,
            'vector': list(self.vector) if self.vector is not None else None,
            'n_samples': self.n_samples,
            'seed': self.seed,
        }


def sample_fields(spec: RandomFieldSpec, chunk_index: int, count: int) -> np.ndarray:
    """count field vectors of one chunk, drawn from that chunk's own stream"""
    if spec.distribution == "fixed-vector":
        return np.tile(np.asarray(spec.vector, dtype=float), (count, 1))
    rng = stream(spec.seed, "field", chunk_index)
    if spec.distribution == "isotropic-gaussian":
        return rng.normal(0.0, spec.B / math.sqrt(3.0), size=(count, 3))
    magnitude = np.abs(rng.normal(0.0, spec.B, size=count))
    direction = rng.normal(size=(count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * magnitude[:, None]


def _batched_cycle(fields: np.ndarray, taus: Sequence[float], pulses: Sequence[np.ndarray], phase: complex) -> np.ndarray:
    """Cycle propagators (count, 2, 2) for H = (1/2) b·σ per row of fields"""
    r = np.linalg.norm(fields, axis=1)
    b_sigma = np.einsum("nk,kij->nij", fields, _PAULI_STACK)
    U = np.broadcast_to(PAULI_I, (len(fields), 2, 2)).astype(complex)
    for tau, P in zip(taus, pulses):
        half_angle = 0.5 * tau * r
        # sin(half_angle)/r written through sinc so that r = 0 is exact
        ratio = 0.5 * tau * np.sinc(half_angle / np.pi)
        F = np.cos(half_angle)[:, None, None] * PAULI_I - 1j * ratio[:, None, None] * b_sigma
        U = P @ (F @ U)
    return U * np.conj(phase)


def _rotation_axis_angle(U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """U ∝ cos(theta) I - i sin(theta) n·σ  ->  (n, theta)"""
    det = U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]
    V = U / np.sqrt(det)[:, None, None]
    cos_theta = 0.5 * np.real(V[:, 0, 0] + V[:, 1, 1])
    s = np.real(0.5j * np.einsum("nij,kji->nk", V, _PAULI_STACK))
    sin_theta = np.linalg.norm(s, axis=1)
    theta = np.arctan2(sin_theta, cos_theta)
    axis = np.divide(s, sin_theta[:, None], out=np.zeros_like(s), where=sin_theta[:, None] > 0)
    return axis, theta


def _bloch_vector(psi: np.ndarray) -> np.ndarray:
    return np.array([np.real(np.vdot(psi, P @ psi)) for P in PAULIS])


def _chunk_moments(
    spec: RandomFieldSpec,
    chunk_index: int,
    count: int,
    taus: Sequence[float],
    pulses: Sequence[np.ndarray],
    phase: complex,
    schedule: np.ndarray,
    r0: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-N sums of loss, loss^2 and the rotated Bloch vector over one chunk"""
    fields = sample_fields(spec, chunk_index, count)
    axis, theta = _rotation_axis_angle(_batched_cycle(fields, taus, pulses, phase))
    angle = np.outer(theta, schedule)
    transverse = np.sum(np.cross(axis, r0) ** 2, axis=1)
    loss = np.sin(angle) ** 2 * transverse[:, None]

    # r(N) = r0 cos(2N theta) + (n x r0) sin(2N theta) + n (n·r0)(1 - cos(2N theta))
    cos2, sin2 = np.cos(2.0 * angle), np.sin(2.0 * angle)
    along = (axis @ r0)[:, None]
    n_cross_r = np.cross(axis, r0)
    bloch = (
        r0[None, None, :] * cos2[:, :, None]
        + n_cross_r[:, None, :] * sin2[:, :, None]
        + axis[:, None, :] * (along * (1.0 - cos2))[:, :, None]
    )
    return loss.sum(axis=0), (loss ** 2).sum(axis=0), bloch.sum(axis=0)


@dataclass
class EnsembleTrajectory:
    cycle_indices: List[int]
    times: List[float]
    fidelity_mean: List[float]
    fidelity_stderr: List[float]
    purity: List[float]
    n_samples: int
    state_label: str = ""
    metadata: Dict = field(default_factory=dict)

    @property
    def loss_mean(self) -> np.ndarray:
        return 1.0 - np.asarray(self.fidelity_mean)

    def as_trajectory(self) -> Trajectory:
        return Trajectory(
            cycle_indices=list(self.cycle_indices),
            times=list(self.times),
            fidelity=list(self.fidelity_mean),
            purity=list(self.purity),
            state_label=self.state_label,
            metadata=dict(self.metadata),
        )


def ensemble_average(
    spec: RandomFieldSpec,
    seq: PulseSequence,
    N_schedule: Sequence[int],
    state: Union[str, Sequence[complex]] = "0",
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> EnsembleTrajectory:
    """
    Average the fidelity of a pure qubit state over sampled static fields.

    Args:
        spec: field ensemble
        seq: qubit pulse cycle (pulses may be non-ideal 2x2 operators)
        N_schedule: cycle counts to report
        state: label understood by named_state or an explicit amplitude pair
        workers: joblib worker count for the sample chunks

    Returns:
        EnsembleTrajectory with mean fidelity, standard error and the purity
        of the ensemble-averaged state
    """
    from backend.quantum.model import named_state

    if seq.dim_S != 2:
        raise DimensionMismatch(f"ensemble averaging needs a qubit sequence, got D_S = {seq.dim_S}")
    pulses = [s.unitary for s in seq.segments]
    if any(P.shape != (2, 2) for P in pulses):
        raise DimensionMismatch("ensemble averaging needs system-only pulses")
    psi = named_state(state, 1) if isinstance(state, str) else check_normalized(state, "state")
    r0 = _bloch_vector(psi)
    schedule = np.asarray([int(n) for n in N_schedule], dtype=float)
    taus = seq.taus

    counts = [min(chunk_size, spec.n_samples - start) for start in range(0, spec.n_samples, chunk_size)]
    log.info(f"{seq.label}: {spec.n_samples} {spec.distribution} samples in {len(counts)} chunk(s), {workers} worker(s)")
    parts = Parallel(n_jobs=workers)(
        delayed(_chunk_moments)(spec, index, count, taus, pulses, seq.phase, schedule, r0)
        for index, count in enumerate(counts)
    )

    n = spec.n_samples
    mean_loss, stderr, purity = [], [], []
    for k in range(len(schedule)):
        total = math.fsum(part[0][k] for part in parts)
        total_sq = math.fsum(part[1][k] for part in parts)
        bloch = np.array([math.fsum(part[2][k][c] for part in parts) for c in range(3)]) / n
        mean = total / n
        variance = max(total_sq / n - mean ** 2, 0.0) * n / (n - 1) if n > 1 else 0.0
        mean_loss.append(mean)
        stderr.append(math.sqrt(variance / n))
        purity.append(min(max(0.5 * (1.0 + float(bloch @ bloch)), 0.5), 1.0))

    fidelity = [min(max(1.0 - m, 0.0), 1.0) for m in mean_loss]
    return EnsembleTrajectory(
        cycle_indices=[int(n_) for n_ in schedule],
        times=[float(n_) * seq.T_c for n_ in schedule],
        fidelity_mean=fidelity,
        fidelity_stderr=stderr,
        purity=purity,
        n_samples=n,
        state_label=state if isinstance(state, str) else "custom",
        metadata={'distribution': spec.distribution, 'B': spec.B, 'seed': spec.seed, 'sequence': seq.label},
    )


# ---------------------------------------------------------------------------
# ESR imperfect rotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ESRPulseErrorSpec:
    """Scales of the rotation-angle error (eps0) and of the axis offsets (n0)"""
    eps0: float = 0.0
    n0: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.eps0 < 0 or self.n0 < 0:
            raise ValueError("eps0 and n0 must be nonnegative")


@dataclass(frozen=True)
class ESRErrors:
    eps: float
    n_y: float
    n_z: float
    m_x: float
    m_z: float

    @property
    def axes(self) -> Tuple[float, float, float, float]:
        return self.n_y, self.n_z, self.m_x, self.m_z

    def to_dict(self) -> Dict:
        return {'eps': self.eps, 'n_y': self.n_y, 'n_z': self.n_z, 'm_x': self.m_x, 'm_z': self.m_z}


def _peaked(scale: float, V: np.ndarray) -> np.ndarray:
    """Inverse CDF of (1/2s)[3(1 - x/s)]^(-1/2) on [-2s, s]"""
    return scale * (1.0 - 3.0 * V ** 2)


def _warn_large(values: np.ndarray):
    worst = float(np.max(np.abs(values), initial=0.0))
    if worst > ESR_WARN_THRESHOLD:
        log.warning(f"ESR pulse error {worst:.3f} exceeds {ESR_WARN_THRESHOLD}; second-order forms are unreliable")


def esr_sample_errors(spec: ESRPulseErrorSpec, index: int = 0) -> ESRErrors:
    """One draw (eps, n_y, n_z, m_x, m_z); index selects an independent draw under the same seed"""
    V = stream(spec.seed, "esr", index).random(5)
    values = np.concatenate((_peaked(spec.eps0, V[:1]), _peaked(spec.n0, V[1:])))
    _warn_large(values)
    return ESRErrors(*(float(v) for v in values))


def esr_sample_batch(spec: ESRPulseErrorSpec, n: int) -> np.ndarray:
    """(n, 5) array of draws, columns eps, n_y, n_z, m_x, m_z"""
    V = stream(spec.seed, "esr-batch").random((n, 5))
    values = np.empty_like(V)
    values[:, 0] = _peaked(spec.eps0, V[:, 0])
    values[:, 1:] = _peaked(spec.n0, V[:, 1:])
    _warn_large(values)
    return values


def imperfect_rotation(eps: float, axis: Sequence[float]) -> np.ndarray:
    """exp(-i (pi + eps) a·σ / 2) for the unit axis a"""
    a = np.asarray(axis, dtype=float)
    return evolve_propagator(0.5 * (math.pi + eps) * np.einsum("k,kij->ij", a, _PAULI_STACK), 1.0)


def _unit_axis(major: int, offsets: Mapping[int, float]) -> np.ndarray:
    a = np.zeros(3)
    for k, v in offsets.items():
        a[k] = v
    remainder = 1.0 - sum(v ** 2 for v in offsets.values())
    if remainder <= 0:
        raise ValueError("axis offsets are too large for a unit rotation axis")
    a[major] = math.sqrt(remainder)
    return a


def _esr_closed_form(name: str, eps: float, n_y: float, n_z: float, m_x: float, m_z: float, a: float) -> np.ndarray:
    """
    T_c H_c to second order in the pulse errors.

    Each imperfect rotation is the ideal one followed by exp(-i E), with
    E_X = (eps/2) σx + n_z σy - n_y σz and E_Y = (eps/2) σy - m_z σx + m_x σz
    up to third order. The coefficients are the toggling-frame sum of these
    generators plus half the sum of their time-ordered commutators.
    """
    c, s = math.cos(a), math.sin(a)
    d = m_x + n_y
    if name == "XYXY":
        return (
            -2.0 * d * ((0.5 * eps * (1.0 + s) - n_z * c) * PAULI_X + (0.5 * eps * c + n_z * s - m_z) * PAULI_Y)
            + (-2.0 * d + 0.5 * eps ** 2 * c + eps * s * (n_z + m_z) - 2.0 * c * n_z * m_z) * PAULI_Z
        )
    D = eps * (1.0 - s) - 2.0 * n_z * (1.0 - c)
    w = 0.5 * eps * (1.0 + c) + n_z * s
    return m_x * D * PAULI_X + (D + 2.0 * d * w) * PAULI_Y - D * (w - m_z) * PAULI_Z


def esr_effective_cycle(
    name: str,
    eps: float,
    axes: Union[Sequence[float], ESRErrors],
    b_z: float,
    tau: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cycle Hamiltonian of XYXY or XZXZ with imperfect X and Y rotations.

    Args:
        name: "XYXY" or "XZXZ" (Z = Y right after X)
        eps: rotation-angle error shared by X and Y
        axes: (n_y, n_z, m_x, m_z) offsets of the X axis n and the Y axis m
        b_z: static field along z, H = b_z σz / 2
        tau: interval between pulses; T_c = 4 tau

    Returns:
        (closed_form, numeric) cycle Hamiltonians, both 2x2
    """
    if name not in ("XYXY", "XZXZ"):
        raise UnknownName(f"ESR cycles are XYXY and XZXZ, got '{name}'")
    n_y, n_z, m_x, m_z = axes.axes if isinstance(axes, ESRErrors) else (float(v) for v in axes)
    _warn_large(np.array([eps, n_y, n_z, m_x, m_z]))

    seq = named_qubit_cycle(name, tau)
    T_c = seq.T_c
    closed_form = _esr_closed_form(name, eps, n_y, n_z, m_x, m_z, b_z * tau) / T_c

    actual = {
        "X": imperfect_rotation(eps, _unit_axis(0, {1: n_y, 2: n_z})),
        "Y": imperfect_rotation(eps, _unit_axis(1, {0: m_x, 2: m_z})),
    }
    U_c = cycle_propagator(substitute_pulses(seq, actual, suffix="esr"), 0.5 * b_z * PAULI_Z)
    numeric = principal_log_hamiltonian(U_c, T_c)
    return closed_form, numeric


def dominant_axis(H: np.ndarray) -> str:
    """'x', 'y' or 'z': the Pauli component of largest magnitude"""
    components = [abs(np.trace(P @ H).real) / 2.0 for P in PAULIS]
    return "xyz"[int(np.argmax(components))]
