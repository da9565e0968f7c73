"""
Experiment Runner

Turns a validated ExperimentConfig into result files:

    trajectory     one CSV per (state, seed): cycle_index,time,fidelity,purity
    sweep          sweep.csv (one row per grid point) + fit.json
    semiclassical  one CSV per state with ensemble mean and standard error
    esr            esr.csv (one row per draw and cycle) + esr_summary.json
    analyze-cycle  analysis.json (decomposition summary + bounds)

Independent units of work (seeds, grid points) go to a joblib pool; results
are collected and sorted by key before anything is written, so the bytes
on disk do not depend on the worker count.
"""

import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from backend.quantum.effective import (
    exact_cycle_hamiltonian,
    magnus_first_order,
    ps_decompose,
    ps_fidelity_bounds,
    ValidityThresholds,
)
from backend.quantum.linalg_core import PAULIS, operator_norm
from backend.quantum.model import (
    CouplingEnsembleSpec,
    SpinBathModel,
    build_H0,
    coupling_strength_A,
    initial_state,
    named_state,
    sample_couplings,
)
from backend.quantum.propagate import Trajectory, cycle_propagator, run_stroboscopic, trajectory_stats
from backend.quantum.pulses import (
    X_PULSE,
    Y_PULSE,
    Z_PULSE,
    IDENTITY_LABEL,
    PulseErrorModel,
    PulseSequence,
    apply_pulse_errors,
    desymmetrize,
    epr_cycle,
    epr_pointer_basis,
    free_evolution,
    named_qubit_cycle,
    random_axis_error,
    uhrig_cycle,
)
from backend.quantum.semiclassical import (
    ESRPulseErrorSpec,
    RandomFieldSpec,
    dominant_axis,
    ensemble_average,
    esr_effective_cycle,
    esr_sample_errors,
)
from backend.runner.fitting import collapse_spread, fit_power_law
from backend.runner.result_table import ResultTable, write_json_report
from config.experiment_config import ExperimentConfig, ModelSection, SequenceSection, StateSpec
from config.simulation_config import get_simulation_config

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["cycle_index", "time", "fidelity", "purity"]
SWEEP_COLUMNS = [
    "tau", "n_B", "seed", "eta", "A", "x",
    "saturation_loss", "saturation_spread", "relative_survival", "secular_slope",
]
ENSEMBLE_COLUMNS = ["cycle_index", "time", "fidelity_mean", "fidelity_stderr", "purity"]
ESR_COLUMNS = [
    "draw", "cycle", "eps", "n_y", "n_z", "m_x", "m_z",
    "closed_x", "closed_y", "closed_z", "numeric_x", "numeric_y", "numeric_z",
    "residual", "dominant_axis",
]

_QUBIT_PULSES = {"X": X_PULSE, "Y": Y_PULSE, "Z": Z_PULSE}


# ---------------------------------------------------------------------------
# Building blocks from config sections
# ---------------------------------------------------------------------------

def build_model(section: ModelSection, seed: int, n_B: Optional[int] = None) -> SpinBathModel:
    spec = CouplingEnsembleSpec(
        J_cap=section.J_cap,
        beta_cap=section.beta_cap,
        K=section.K,
        n_qubits=section.n_qubits,
        n_B=section.n_B if n_B is None else n_B,
        seed=seed,
    )
    return sample_couplings(spec)


def build_sequence(
    section: SequenceSection,
    n_qubits: int,
    seed: int,
    tau: Optional[float] = None,
    eta: Optional[float] = None,
) -> PulseSequence:
    """
    Ideal cycle from the descriptor, then systematic errors if configured.

    tau and eta override the descriptor (sweeps).
    """
    tau = section.tau if tau is None else tau
    if n_qubits == 2:
        seq = epr_cycle(section.name, tau)
    elif section.name == "free":
        seq = free_evolution(tau, 2)
    elif section.uhrig:
        seq = uhrig_cycle(Z_PULSE, section.n_pulses, tau * (section.n_pulses + 1), label="Z")
    else:
        seq = named_qubit_cycle(section.name, tau)
    if section.desymmetrize:
        seq = desymmetrize(seq, _QUBIT_PULSES[section.desymmetrize], label=section.desymmetrize)

    errors = section.errors
    strength = eta if eta is not None else (errors.eta if errors is not None else None)
    labels = [label for label in seq.primitive_labels if label != IDENTITY_LABEL]
    if errors is not None and errors.actions is not None and eta is None:
        model = PulseErrorModel({label: np.array(_complex_matrix(m)) for label, m in errors.actions.items()})
        return apply_pulse_errors(seq, model)
    if strength:
        error_seed = errors.seed if errors is not None and errors.seed is not None else seed
        return apply_pulse_errors(seq, random_axis_error(labels, strength, error_seed))
    return seq


def _complex_matrix(rows) -> List[List[complex]]:
    return [[complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in row] for row in rows]


def resolve_state(state: StateSpec, n_qubits: int) -> np.ndarray:
    if state.amplitudes is not None:
        return np.asarray(state.amplitudes, dtype=complex)
    return named_state(state.label, n_qubits)


def _safe_label(label: str) -> str:
    label = label.replace('+', 'p').replace('-', 'm')
    return re.sub(r'[^A-Za-z0-9_]', '', label) or "state"


def _output_dir(config: ExperimentConfig, out_dir=None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    if config.output:
        return Path(config.output)
    return Path(get_simulation_config().output_dir)


def _version() -> str:
    return get_simulation_config().artifact_version


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def _trajectories_for_seed(config: ExperimentConfig, seed: int) -> List[Tuple[str, int, Trajectory]]:
    model = build_model(config.model, seed)
    seq = build_sequence(config.sequence, model.n_qubits, seed)
    U_c = cycle_propagator(seq, build_H0(model))
    schedule = config.schedule.indices()
    results = []
    for state in config.states:
        rho0 = initial_state(resolve_state(state, model.n_qubits), model)
        traj = run_stroboscopic(
            U_c,
            rho0,
            schedule,
            model.dims,
            T_c=seq.T_c,
            state_label=state.label,
            metadata={'seed': seed, 'sequence': seq.label, 'tau': config.sequence.tau},
            reunitarize_every=int(get_simulation_config().get('propagation.reunitarize_every', 256)),
        )
        results.append((state.label, seed, traj))
    return results


def trajectory_table(traj: Trajectory, config_hash: str, seed: int) -> ResultTable:
    table = ResultTable(
        columns=list(TRAJECTORY_COLUMNS),
        config_hash=config_hash,
        seed=seed,
        version=_version(),
        comments=[
            "cycle_index in cycles, time in units of 1/J_cap",
            f"state={traj.state_label} sequence={traj.metadata.get('sequence', '')} tau={traj.metadata.get('tau', '')}",
        ],
    )
    for n, t, f, p in zip(traj.cycle_indices, traj.times, traj.fidelity, traj.purity):
        table.add_row(int(n), float(t), float(f), float(p))
    return table


def run_trajectories(config: ExperimentConfig, workers: int = 1) -> List[Tuple[str, int, Trajectory]]:
    """All (state, seed) trajectories, sorted by seed then state order"""
    batches = Parallel(n_jobs=workers)(delayed(_trajectories_for_seed)(config, seed) for seed in sorted(config.seeds))
    return [item for batch in batches for item in batch]


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _sweep_point(config: ExperimentConfig, tau: float, n_B: int, seed: int, eta: float) -> List:
    model = build_model(config.model, seed, n_B=n_B)
    seq = build_sequence(config.sequence, model.n_qubits, seed, tau=tau, eta=eta)
    U_c = cycle_propagator(seq, build_H0(model))
    state = config.states[0]
    traj = run_stroboscopic(
        U_c,
        initial_state(resolve_state(state, model.n_qubits), model),
        config.schedule.indices(),
        model.dims,
        T_c=seq.T_c,
        state_label=state.label,
    )
    settings = get_simulation_config()
    stats = trajectory_stats(
        traj,
        window_fraction=float(settings.get('analysis.window_fraction', 0.5)),
        f_min=float(settings.get('analysis.f_min', 0.5)),
    )
    A = coupling_strength_A(model)
    x = tau * A if config.sweep.abscissa == "tauA" else tau * A * math.sqrt(n_B)
    log.debug(f"tau={tau} n_B={n_B} seed={seed} eta={eta}: loss {stats.saturation_loss:.4e}")
    return [tau, n_B, seed, eta, A, x, stats.saturation_loss, stats.saturation_spread,
            stats.relative_survival, stats.secular_slope]


def sweep_and_fit(config: ExperimentConfig, workers: int = 1) -> Tuple[ResultTable, Dict]:
    """
    Saturated loss over the tau x n_B x seed x eta grid and a power-law fit
    of loss against the configured abscissa.

    Raises:
        InsufficientPoints: fewer than 4 grid points with positive loss
    """
    sweep = config.sweep
    grid = sorted(
        (tau, n_B, seed, eta) for tau in sweep.tau for n_B in sweep.n_B for seed in sweep.seeds for eta in sweep.eta
    )
    log.info(f"Sweep over {len(grid)} grid point(s) with {workers} worker(s)")
    rows = Parallel(n_jobs=workers)(delayed(_sweep_point)(config, *point) for point in grid)

    table = ResultTable(
        columns=list(SWEEP_COLUMNS),
        config_hash=config.config_hash(),
        seed=config.seed,
        version=_version(),
        comments=[f"abscissa x = {sweep.abscissa}; losses from the final window of each trajectory"],
    )
    for row in sorted(rows, key=lambda r: tuple(r[:4])):
        table.add_row(*row)

    x = table.column("x")
    y = table.column("saturation_loss")
    fit = fit_power_law(x, y)
    groups: Dict[int, Tuple[List[float], List[float]]] = {}
    for row in table.rows:
        xs, ys = groups.setdefault(row[1], ([], []))
        xs.append(row[5])
        ys.append(row[6])
    report = {
        'fit': fit.to_dict(),
        'abscissa': sweep.abscissa,
        'collapse_spread': collapse_spread(groups, fit.alpha) if len(groups) > 1 else 0.0,
        'grid_points': len(grid),
    }
    log.info(f"Fit alpha={fit.alpha:.3f} R^2={fit.r_squared:.4f}")
    return table, report


# ---------------------------------------------------------------------------
# Semiclassical ensembles and ESR
# ---------------------------------------------------------------------------

def run_semiclassical(config: ExperimentConfig, workers: int = 1) -> List[Tuple[str, ResultTable]]:
    section = config.field_spec
    spec = RandomFieldSpec(
        distribution=section.distribution,
        B=section.B,
        vector=section.vector,
        n_samples=section.n_samples,
        seed=config.seed,
    )
    seq = build_sequence(config.sequence, 1, config.seed)
    chunk_size = int(get_simulation_config().get('semiclassical.chunk_size', 4096))
    tables = []
    for state in config.states:
        amplitudes = resolve_state(state, 1)
        result = ensemble_average(spec, seq, config.schedule.indices(), amplitudes, workers=workers, chunk_size=chunk_size)
        table = ResultTable(
            columns=list(ENSEMBLE_COLUMNS),
            config_hash=config.config_hash(),
            seed=config.seed,
            version=_version(),
            comments=[
                f"state={state.label} sequence={seq.label} distribution={spec.distribution} "
                f"B={spec.B} n_samples={spec.n_samples}",
            ],
        )
        for row in zip(result.cycle_indices, result.times, result.fidelity_mean, result.fidelity_stderr, result.purity):
            table.add_row(int(row[0]), *(float(v) for v in row[1:]))
        tables.append((state.label, table))
    return tables


def _pauli_components(H: np.ndarray) -> List[float]:
    return [float(np.trace(P @ H).real / 2.0) for P in PAULIS]


def run_esr(config: ExperimentConfig) -> Tuple[ResultTable, Dict]:
    section = config.esr
    spec = ESRPulseErrorSpec(eps0=section.eps0, n0=section.n0, seed=config.seed)
    tau = config.sequence.tau
    table = ResultTable(
        columns=list(ESR_COLUMNS),
        config_hash=config.config_hash(),
        seed=config.seed,
        version=_version(),
        comments=[f"cycle Hamiltonians in units of J_cap; b_z={section.b_z} tau={tau}"],
    )
    counts = {name: {'x': 0, 'y': 0, 'z': 0} for name in section.cycles}
    for draw in range(section.n_draws):
        errors = esr_sample_errors(spec, index=draw)
        for name in section.cycles:
            closed, numeric = esr_effective_cycle(name, errors.eps, errors, section.b_z, tau)
            axis = dominant_axis(closed)
            counts[name][axis] += 1
            table.add_row(
                draw, name, errors.eps, *errors.axes,
                *_pauli_components(closed), *_pauli_components(numeric),
                operator_norm(numeric - closed), axis,
            )
    return table, {'dominant_axis_counts': counts, 'n_draws': section.n_draws}


# ---------------------------------------------------------------------------
# Cycle analysis
# ---------------------------------------------------------------------------

def _pointer_basis(config: ExperimentConfig, n_qubits: int) -> Tuple[List[np.ndarray], int]:
    analysis = config.analysis
    if analysis.pointer_basis is not None:
        basis = [named_state(label, n_qubits) for label in analysis.pointer_basis]
        return basis, analysis.p or len(basis)
    if n_qubits == 2:
        basis, p = epr_pointer_basis(config.sequence.name)
        return basis, analysis.p or p
    labels = ["+Y", "-Y"] if config.sequence.name == "XZXZ" else ["0", "1"]
    basis = [named_state(label, 1) for label in labels]
    return basis, analysis.p or len(basis)


def analyze_cycle(config: ExperimentConfig, seed: Optional[int] = None) -> Dict:
    """
    Cycle Hamiltonian, pointer-state decomposition and bounds for one model.

    Raises:
        BranchAmbiguity: T_c ||H_c|| too close to pi (reduce tau)
        ZeroGap: when bounds are requested for a degenerate decomposition
    """
    seed = config.seed if seed is None else seed
    model = build_model(config.model, seed)
    seq = build_sequence(config.sequence, model.n_qubits, seed)
    H0 = build_H0(model)
    U_c = cycle_propagator(seq, H0)
    H_c = exact_cycle_hamiltonian(U_c, seq.T_c)
    basis, p = _pointer_basis(config, model.n_qubits)
    decomp = ps_decompose(H_c, basis, p, model.dims, monitored=config.analysis.monitored)

    report = {
        'sequence': seq.describe(),
        'model': model.to_dict(),
        'A': [coupling_strength_A(model, k) for k in range(model.n_qubits)],
        'decomposition': decomp.summary(),
        'magnus_residual': operator_norm(H_c - magnus_first_order(seq, H0)) if seq.ideal else None,
    }
    if config.analysis.T_total is not None:
        bounds = ps_fidelity_bounds(decomp, seq.T_c, config.analysis.T_total, ValidityThresholds.from_config())
        report['bounds'] = bounds.to_dict()
    return report


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def run_experiment(config: ExperimentConfig, out_dir=None, workers: Optional[int] = None) -> Dict:
    """
    Run one experiment and write its result files.

    Args:
        config: validated experiment
        out_dir: overrides config.output and the configured default
        workers: joblib worker count (default from configuration)

    Returns:
        Summary dict with the kind, config hash and written file paths
    """
    workers = workers or get_simulation_config().workers
    out = _output_dir(config, out_dir)
    digest = config.config_hash()
    files: List[Path] = []
    summary: Dict = {'kind': config.kind, 'config_hash': digest}
    log.info(f"Running {config.kind} experiment {digest[:12]} into {out}")

    if config.kind == "trajectory":
        for label, seed, traj in run_trajectories(config, workers):
            path = out / f"trajectory_{_safe_label(label)}_seed{seed}.csv"
            files.append(trajectory_table(traj, digest, seed).write_csv(path))
    elif config.kind == "sweep":
        table, report = sweep_and_fit(config, workers)
        files.append(table.write_csv(out / "sweep.csv"))
        files.append(write_json_report(out / "fit.json", report, digest, config.seed, _version()))
        summary['fit'] = report['fit']
    elif config.kind == "semiclassical":
        for label, table in run_semiclassical(config, workers):
            files.append(table.write_csv(out / f"semiclassical_{_safe_label(label)}_seed{config.seed}.csv"))
    elif config.kind == "esr":
        table, report = run_esr(config)
        files.append(table.write_csv(out / "esr.csv"))
        files.append(write_json_report(out / "esr_summary.json", report, digest, config.seed, _version()))
    elif config.kind == "analyze-cycle":
        report = analyze_cycle(config)
        files.append(write_json_report(out / "analysis.json", report, digest, config.seed, _version()))
        summary['analysis'] = report

    summary['files'] = [str(f) for f in files]
    log.info(f"Wrote {len(files)} file(s)")
    return summary
