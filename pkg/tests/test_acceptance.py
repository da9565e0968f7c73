"""
Desk-scale reproductions of the headline spin-bath results.

These take minutes; run them with `pytest -m slow`.
"""

import numpy as np
import pytest

from backend.quantum.linalg_core import PAULI_X, PAULI_Z
from backend.quantum.model import (
    CouplingEnsembleSpec,
    build_H0,
    coupling_strength_A,
    initial_state,
    named_state,
    sample_couplings,
)
from backend.quantum.propagate import cycle_propagator, run_stroboscopic, trajectory_stats
from backend.quantum.pulses import (
    PulseErrorModel,
    apply_pulse_errors,
    epr_cycle,
    free_evolution,
    named_qubit_cycle,
)
from backend.runner.fitting import collapse_spread, fit_power_law

pytestmark = pytest.mark.slow

# excludes the t=0 sample and the first late sample
LATE_WINDOW = 0.9


def _late_schedule(N_max: int, points: int = 21):
    """0, then evenly spaced samples over the second half of the run"""
    late = np.linspace(N_max // 2, N_max, points).astype(int)
    return [0] + sorted(set(late.tolist()))


def _trajectory(model, seq, label, schedule):
    U_c = cycle_propagator(seq, build_H0(model))
    rho0 = initial_state(named_state(label, model.n_qubits), model)
    return run_stroboscopic(U_c, rho0, schedule, model.dims, T_c=seq.T_c, state_label=label)


def _late_stats(model, seq, label, N_max):
    schedule = _late_schedule(N_max)
    traj = _trajectory(model, seq, label, schedule)
    return trajectory_stats(traj, window_fraction=LATE_WINDOW)


def test_pointer_state_loss_scales_quadratically_in_tau():
    model = sample_couplings(CouplingEnsembleSpec(n_B=6, beta_cap=0.0, seed=0))
    A = coupling_strength_A(model)
    xs = np.geomspace(0.005, 0.04, 5)
    losses = [
        _late_stats(model, named_qubit_cycle("ZZ", x / A), "+Z", 10000).saturation_loss
        for x in xs
    ]
    fit = fit_power_law(xs, losses)
    assert 1.8 <= fit.alpha <= 2.2
    assert fit.r_squared > 0.98


def test_bath_size_collapse():
    xs = np.geomspace(0.01, 0.04, 3)
    groups = {}
    for n_B in (3, 4, 5, 6):
        per_seed = []
        for seed in range(3):
            model = sample_couplings(CouplingEnsembleSpec(n_B=n_B, beta_cap=0.0, seed=seed))
            scale = coupling_strength_A(model) * np.sqrt(n_B)
            per_seed.append([
                _late_stats(model, named_qubit_cycle("ZZ", x / scale), "+Z", 4000).saturation_loss
                for x in xs
            ])
        groups[n_B] = (xs, np.mean(per_seed, axis=0))
    alpha = fit_power_law(
        np.concatenate([g[0] for g in groups.values()]),
        np.concatenate([g[1] for g in groups.values()]),
    ).alpha
    assert collapse_spread(groups, alpha) <= 0.25


def test_zz_and_xyxy_select_the_z_axis():
    model = sample_couplings(CouplingEnsembleSpec(n_B=6, beta_cap=0.0, seed=0))
    tau = 0.01
    ceiling = 10 * 0.95 * (tau * coupling_strength_A(model)) ** 2

    zz_z = _late_stats(model, named_qubit_cycle("ZZ", tau), "+Z", 10000)
    zz_x = _late_stats(model, named_qubit_cycle("ZZ", tau), "+X", 10000)
    xyxy_z = _late_stats(model, named_qubit_cycle("XYXY", tau), "+Z", 10000)
    free_x = _late_stats(model, free_evolution(tau, 2), "+X", 5000)

    assert zz_z.saturation_loss < ceiling
    assert xyxy_z.saturation_loss < ceiling
    assert zz_x.saturation_loss >= 0.2
    assert free_x.saturation_loss >= 0.2
    assert zz_z.relative_survival > 10 * zz_x.relative_survival


def test_bell_state_engineering():
    e1_model = sample_couplings(CouplingEnsembleSpec(n_qubits=2, n_B=6, beta_cap=0.0, K=1.0, seed=0))
    e1 = epr_cycle("E1", 0.01)
    assert _late_stats(e1_model, e1, "EPR1", 4000).saturation_loss < 1e-2
    assert _late_stats(e1_model, e1, "00", 4000).saturation_loss >= 0.3

    e3 = epr_cycle("E3", 0.01)
    schedule = _late_schedule(4000)
    spread = {}
    for K in (0.0, 1.0):
        e3_model = sample_couplings(CouplingEnsembleSpec(n_qubits=2, n_B=4, beta_cap=0.0, K=K, seed=0))
        if K:
            for label in ("EPR0", "EPR1", "EPR2", "EPR3"):
                traj = _trajectory(e3_model, e3, label, schedule)
                assert min(traj.purity) > 0.95
        late = _trajectory(e3_model, e3, "01", schedule).fidelity[1:]
        spread[K] = max(late) - min(late)
    # K S1·S2 splits the singlet from the triplet, so |01> beats between them
    assert spread[1.0] > 0.5
    assert spread[0.0] < 0.5 * spread[1.0]


def _tilt(eta):
    return eta * (PAULI_X + PAULI_Z) / np.sqrt(2.0)


def test_reflection_cycle_tolerates_systematic_pulse_errors():
    model = sample_couplings(CouplingEnsembleSpec(n_B=5, beta_cap=0.0, seed=1))
    tau = 0.01
    for eta in (0.001, 0.01, 0.05):
        seq = apply_pulse_errors(named_qubit_cycle("ZZ", tau), PulseErrorModel({"Z": _tilt(eta)}))
        schedule = _late_schedule(10000)
        traj = _trajectory(model, seq, "0", schedule)
        stats = trajectory_stats(traj, window_fraction=LATE_WINDOW)
        window = traj.times[-1] - traj.times[1]
        assert abs(stats.secular_slope) * window < 0.01


def test_xyxy_degrades_faster_with_stronger_pulse_errors():
    model = sample_couplings(CouplingEnsembleSpec(n_B=5, beta_cap=0.0, seed=1))
    schedule = np.linspace(0, 10000, 201).astype(int).tolist()
    mean_loss = []
    for eta in (0.001, 0.01, 0.05):
        errors = PulseErrorModel({"X": _tilt(eta), "Y": _tilt(eta)})
        seq = apply_pulse_errors(named_qubit_cycle("XYXY", 0.01), errors)
        fidelity = np.asarray(_trajectory(model, seq, "+X", schedule).fidelity)
        mean_loss.append(float(np.mean(1.0 - fidelity)))
    assert mean_loss[0] < mean_loss[1] < mean_loss[2]
