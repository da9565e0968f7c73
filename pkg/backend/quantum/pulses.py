"""
Pulse cycles for pointer-state engineering and dynamical decoupling.

A cycle is a list of segments. Each segment is a free evolution of length
tau followed by one instantaneous pulse; a pulse may be composed of several
primitives applied back to back (the ESR-style Z = Y after X), and the
primitives keep their own labels so systematic errors can be attached to
each physical pulse type.

Named qubit pulses are pi rotations, X = exp(-i pi sigma_x / 2) = -i sigma_x
and so on, which is the convention the imperfect-rotation models perturb.
"""

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from backend.quantum.errors import (
    BadP,
    CycleNotClosed,
    DimensionMismatch,
    MissingErrorEntry,
    NotUniformCycle,
    RNotInvolution,
    UnknownName,
)
from backend.quantum.linalg_core import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    check_hermitian,
    check_normalized,
    check_orthonormal,
    check_unitary,
    evolve_propagator,
    lift,
    operator_norm,
    projector,
)
from backend.quantum.model import bell_states
from backend.quantum.randomness import stream

log = logging.getLogger(__name__)

CLOSURE_TOL = 1e-9
IDENTITY_LABEL = "I"


@dataclass(frozen=True, eq=False)
class Pulse:
    label: str
    unitary: np.ndarray


@dataclass(frozen=True, eq=False)
class Segment:
    """Free evolution for tau, then the primitives in time order"""
    tau: float
    pulses: Tuple[Pulse, ...]

    @property
    def unitary(self) -> np.ndarray:
        U = self.pulses[0].unitary
        for pulse in self.pulses[1:]:
            U = _matmul_lifted(pulse.unitary, U)
        return U

    @property
    def label(self) -> str:
        return "".join(reversed([p.label for p in self.pulses])) if len(self.pulses) > 1 else self.pulses[0].label


def _matmul_lifted(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A @ B, lifting the smaller (system-only) factor to the larger dimension"""
    if A.shape == B.shape:
        return A @ B
    if A.shape[0] < B.shape[0]:
        return lift(A, B.shape[0] // A.shape[0]) @ B
    return A @ lift(B, A.shape[0] // B.shape[0])


@dataclass(frozen=True, eq=False)
class PulseSequence:
    segments: Tuple[Segment, ...]
    dim_S: int
    label: str = ""
    ideal: bool = True
    phase: complex = 1.0

    @property
    def T_c(self) -> float:
        return float(sum(s.tau for s in self.segments))

    @property
    def taus(self) -> List[float]:
        return [s.tau for s in self.segments]

    @property
    def unitaries(self) -> List[np.ndarray]:
        return [s.unitary for s in self.segments]

    @property
    def primitive_labels(self) -> List[str]:
        labels = []
        for segment in self.segments:
            for pulse in segment.pulses:
                if pulse.label not in labels:
                    labels.append(pulse.label)
        return labels

    def closure_product(self) -> np.ndarray:
        U = self.segments[0].unitary
        for segment in self.segments[1:]:
            U = _matmul_lifted(segment.unitary, U)
        return U

    def describe(self) -> Dict:
        return {
            'label': self.label,
            'dim_S': self.dim_S,
            'T_c': self.T_c,
            'ideal': self.ideal,
            'segments': [{'tau': s.tau, 'pulse': s.label} for s in self.segments],
        }


def _closure_phase(product: np.ndarray, dim_S: int) -> complex:
    """Tr(P_n...P_1)/D_S as a unit phase; raises when the product is not ∝ I"""
    trace = np.trace(product) / dim_S
    if abs(abs(trace) - 1.0) > CLOSURE_TOL:
        raise CycleNotClosed(f"|Tr(P_n...P_1)|/D_S = {abs(trace):.12f}, expected 1")
    return complex(trace / abs(trace))


def make_sequence(segments: Sequence[Segment], dim_S: int, label: str) -> PulseSequence:
    """Assemble an ideal cycle and verify closure"""
    segments = tuple(segments)
    if not segments:
        raise ValueError("a cycle needs at least one segment")
    for segment in segments:
        if not segment.tau > 0:
            raise ValueError(f"segment interval must be positive, got {segment.tau}")
        for pulse in segment.pulses:
            if pulse.unitary.shape != (dim_S, dim_S):
                raise DimensionMismatch(f"pulse {pulse.label} is not a {dim_S}x{dim_S} system operator")
    draft = PulseSequence(segments=segments, dim_S=dim_S, label=label)
    phase = _closure_phase(draft.closure_product(), dim_S)
    return PulseSequence(segments=segments, dim_S=dim_S, label=label, ideal=True, phase=phase)


def toggling_frames(seq: PulseSequence) -> List[Tuple[float, np.ndarray]]:
    """(tau_j, Q_j) with Q_1 = I and Q_j = P_{j-1}...P_1"""
    frames = []
    Q = np.eye(seq.dim_S, dtype=complex)
    for segment in seq.segments:
        frames.append((segment.tau, Q))
        Q = _matmul_lifted(segment.unitary, Q)
    return frames


# ---------------------------------------------------------------------------
# Pulse operators
# ---------------------------------------------------------------------------

X_PULSE = -1j * PAULI_X
Y_PULSE = -1j * PAULI_Y
Z_PULSE = -1j * PAULI_Z


def reflection_Q(target, D_S: int) -> np.ndarray:
    """Q = 2|psi><psi| - I: keeps the target, flips its complement"""
    psi = check_normalized(target, "reflection target")
    if psi.shape[0] != D_S:
        raise DimensionMismatch(f"target has dimension {psi.shape[0]}, expected {D_S}")
    return 2.0 * projector(psi) - np.eye(D_S, dtype=complex)


def sigma_pulse(D_S: int, p: int, basis: Sequence) -> np.ndarray:
    """
    Diagonal pulse marking p pointer states with distinct roots of unity.

    Args:
        D_S: system dimension
        p: number of designated pointer states, 1 <= p <= D_S - 1
        basis: orthonormal states; the first p are the designated set

    Returns:
        sum_j omega^(j+1) |b_j><b_j| + (I - sum_j |b_j><b_j|), omega = exp(2 pi i/(p+1))
    """
    if not 1 <= p <= D_S - 1:
        raise BadP(f"p must lie in [1, {D_S - 1}], got {p}")
    basis = list(basis)
    if len(basis) < p:
        raise BadP(f"basis has {len(basis)} states but p = {p}")
    B = check_orthonormal(basis, dim=D_S)[:, :p]
    omega = np.exp(2j * np.pi / (p + 1))
    weights = omega ** np.arange(1, p + 1) - 1.0
    return np.eye(D_S, dtype=complex) + (B * weights) @ B.conj().T


def _two_qubit_spin_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.25 * np.kron(a, b)


def epr_pulse(which: str) -> np.ndarray:
    """U_E1 = SWAP, U_E2 = exp[i 4pi/3 (SxSx + SzSz)], U_E3 = exp[i pi (SxSx + 2 SzSz)] e^{i pi/4}"""
    xx = _two_qubit_spin_product(PAULI_X, PAULI_X)
    zz = _two_qubit_spin_product(PAULI_Z, PAULI_Z)
    if which == "E1":
        swap = np.zeros((4, 4), dtype=complex)
        swap[0, 0] = swap[3, 3] = 1.0
        swap[1, 2] = swap[2, 1] = 1.0
        return swap
    if which == "E2":
        return evolve_propagator(xx + zz, -4.0 * np.pi / 3.0)
    if which == "E3":
        return evolve_propagator(xx + 2.0 * zz, -np.pi) * np.exp(1j * np.pi / 4.0)
    raise UnknownName(f"unknown EPR cycle '{which}' (expected E1, E2 or E3)")


EPR_REPETITIONS = {"E1": 2, "E2": 3, "E3": 4}
EPR_TARGETS = {
    "E1": ("EPR1",),
    "E2": ("EPR1", "EPR2"),
    "E3": ("EPR0", "EPR1", "EPR2", "EPR3"),
}


def epr_pointer_basis(which: str) -> Tuple[List[np.ndarray], int]:
    """Bell basis ordered designated-first, plus the number of designated states"""
    if which not in EPR_TARGETS:
        raise UnknownName(f"unknown EPR cycle '{which}'")
    bell = bell_states()
    designated = list(EPR_TARGETS[which])
    rest = [name for name in bell if name not in designated]
    return [bell[name] for name in designated + rest], len(designated)


# ---------------------------------------------------------------------------
# Cycle constructors
# ---------------------------------------------------------------------------

def _single(tau: float, label: str, U: np.ndarray) -> Segment:
    return Segment(tau=float(tau), pulses=(Pulse(label, U),))


def uniform_cycle(P, n_pulses: int, tau: float, label: str = "P", name: Optional[str] = None) -> PulseSequence:
    """f P f P ... f P with n_pulses equal intervals"""
    P = check_unitary(P, "pulse")
    if n_pulses < 1:
        raise ValueError("n_pulses must be at least 1")
    segments = [_single(tau, label, P) for _ in range(n_pulses)]
    return make_sequence(segments, P.shape[0], name or f"{label}x{n_pulses}")


def free_evolution(tau: float, D_S: int) -> PulseSequence:
    """One free segment with an identity pulse"""
    return make_sequence([_single(tau, IDENTITY_LABEL, np.eye(D_S, dtype=complex))], D_S, "free")


_NAMED_QUBIT_CYCLES = {
    "ZZ": (("Z",), ("Z",)),
    "XYXY": (("X",), ("Y",), ("X",), ("Y",)),
    "XZXZ": (("X",), ("X", "Y"), ("X",), ("X", "Y")),
}

_QUBIT_PRIMITIVES = {"X": X_PULSE, "Y": Y_PULSE, "Z": Z_PULSE}


def named_qubit_cycle(name: str, tau: float) -> PulseSequence:
    """ZZ, XYXY or XZXZ; in XZXZ each Z is a Y pulse applied right after an X pulse"""
    if name not in _NAMED_QUBIT_CYCLES:
        raise UnknownName(f"unknown qubit cycle '{name}' (expected one of {sorted(_NAMED_QUBIT_CYCLES)})")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    segments = [
        Segment(tau=float(tau), pulses=tuple(Pulse(p, _QUBIT_PRIMITIVES[p]) for p in primitives))
        for primitives in _NAMED_QUBIT_CYCLES[name]
    ]
    return make_sequence(segments, 2, name)


def epr_cycle(which: str, tau: float) -> PulseSequence:
    U = epr_pulse(which)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return uniform_cycle(U, EPR_REPETITIONS[which], tau, label=which, name=which)


def desymmetrize(base: PulseSequence, R, label: str = "R") -> PulseSequence:
    """
    Interleave the involution R into a cycle on a uniform time grid:
    [fRfR]P_1 ... [fRfR]P_n.

    Each base segment (tau, P_j) becomes (tau/2, R) then (tau/2, R followed
    by P_j), so T_c is unchanged and the cycle still closes. P_j may be
    composite, which makes the output a valid base again: passing the
    per-qubit reflections one after another on a ZZ-type base builds the
    concatenated (nested) ZZ cycles level by level.
    """
    first = base.segments[0]
    if any(abs(s.tau - first.tau) > 1e-15 * max(1.0, first.tau) for s in base.segments):
        raise NotUniformCycle(f"{base.label} does not have equal pulse intervals")
    R = check_unitary(R, "desymmetrizing pulse")
    if R.shape != (base.dim_S, base.dim_S):
        raise DimensionMismatch(f"R must act on the {base.dim_S}-dimensional system")
    for pulse in (p for s in base.segments for p in s.pulses):
        if pulse.label == label and not np.allclose(pulse.unitary, R, atol=1e-12):
            raise ValueError(f"label '{label}' already names a different pulse in {base.label}")
    square = R @ R
    trace = np.trace(square) / base.dim_S
    if abs(abs(trace) - 1.0) > CLOSURE_TOL:
        raise RNotInvolution(f"R^2 is not proportional to I (|Tr R^2|/D = {abs(trace):.12f})")
    half = first.tau / 2.0
    r_pulse = Pulse(label, R)
    segments = []
    for segment in base.segments:
        segments.append(Segment(tau=half, pulses=(r_pulse,)))
        segments.append(Segment(tau=half, pulses=(r_pulse,) + segment.pulses))
    return make_sequence(segments, base.dim_S, f"{base.label}+desym")


def uhrig_intervals(n_pulses: int, T_c: float) -> List[float]:
    """Intervals between pulses at t_j = T_c sin^2(j pi / (2n + 2)), closed at T_c"""
    if n_pulses < 1:
        raise ValueError("n_pulses must be at least 1")
    j = np.arange(1, n_pulses + 1)
    times = T_c * np.sin(j * np.pi / (2 * n_pulses + 2)) ** 2
    edges = np.concatenate(([0.0], times, [T_c]))
    return np.diff(edges).tolist()


def uhrig_cycle(P, n_pulses: int, T_c: float, label: str = "Q") -> PulseSequence:
    """
    Reflection pulses at the Uhrig times. The cycle is closed at T_c by one
    more P when n_pulses is odd and by an identity otherwise.
    """
    P = check_unitary(P, "pulse")
    intervals = uhrig_intervals(n_pulses, T_c)
    segments = [_single(tau, label, P) for tau in intervals[:-1]]
    closing = (label, P) if n_pulses % 2 else (IDENTITY_LABEL, np.eye(P.shape[0], dtype=complex))
    segments.append(_single(intervals[-1], *closing))
    return make_sequence(segments, P.shape[0], f"UDD{n_pulses}")


# ---------------------------------------------------------------------------
# Systematic pulse errors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PulseErrorModel:
    """Error action E_P per pulse label; U_P = P exp(-i E_P) at every occurrence"""
    errors: Mapping[str, np.ndarray]

    def __post_init__(self):
        checked = {label: check_hermitian(E, f"error action for {label}") for label, E in self.errors.items()}
        object.__setattr__(self, "errors", MappingProxyType(checked))

    @property
    def epsilon(self) -> float:
        return max((operator_norm(E) for E in self.errors.values()), default=0.0)

    def for_label(self, label: str) -> np.ndarray:
        if label not in self.errors:
            raise MissingErrorEntry(f"no error action for pulse '{label}'")
        return self.errors[label]

    @classmethod
    def uniform(cls, labels: Iterable[str], E) -> "PulseErrorModel":
        return cls({label: np.asarray(E, dtype=complex) for label in labels})


def random_axis_error(labels: Iterable[str], eta: float, seed: int) -> PulseErrorModel:
    """E_P = eta (e_x sigma_x + e_y sigma_y + e_z sigma_z), e uniform on [-1, 1]^3, fixed per label"""
    errors = {}
    for label in labels:
        e = stream(seed, f"pulse-axis:{label}").uniform(-1.0, 1.0, size=3)
        errors[label] = eta * (e[0] * PAULI_X + e[1] * PAULI_Y + e[2] * PAULI_Z)
    return PulseErrorModel(errors)


def substitute_pulses(seq: PulseSequence, actual: Mapping[str, np.ndarray], suffix: str = "actual") -> PulseSequence:
    """Replace primitives by the given operators (system or system⊗bath); the result is non-ideal"""
    segments = []
    for segment in seq.segments:
        pulses = tuple(
            Pulse(p.label, np.asarray(actual[p.label], dtype=complex)) if p.label in actual else p
            for p in segment.pulses
        )
        segments.append(Segment(tau=segment.tau, pulses=pulses))
    return PulseSequence(
        segments=tuple(segments),
        dim_S=seq.dim_S,
        label=f"{seq.label}+{suffix}",
        ideal=False,
        phase=seq.phase,
    )


def apply_pulse_errors(seq: PulseSequence, errs: PulseErrorModel) -> PulseSequence:
    """
    Replace every pulse P by P exp(-i E_P).

    Identity placeholders of free segments are not physical pulses and are
    left alone. A system⊗bath E_P lifts the pulse to the full dimension.
    """
    actual = {}
    for label in seq.primitive_labels:
        if label == IDENTITY_LABEL:
            continue
        E = errs.for_label(label)
        ideal = next(p.unitary for s in seq.segments for p in s.pulses if p.label == label)
        if not np.any(E):
            actual[label] = ideal
            continue
        if E.shape[0] % seq.dim_S:
            raise DimensionMismatch(f"error action for {label} has dimension {E.shape[0]}")
        actual[label] = lift(ideal, E.shape[0] // seq.dim_S) @ evolve_propagator(E, 1.0)
    return substitute_pulses(seq, actual, suffix="errors")
