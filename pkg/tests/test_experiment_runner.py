import json

import numpy as np
import pytest

from backend.quantum.errors import ZeroGap
from backend.runner.experiment_runner import analyze_cycle, build_sequence, run_experiment
from backend.runner.result_table import ResultTable
from config.experiment_config import parse_experiment
from config.simulation_config import reset_simulation_config


def _trajectory_doc(**overrides):
    document = {
        "kind": "trajectory",
        "seeds": [1, 2],
        "model": {"n_qubits": 1, "n_B": 2, "beta_cap": 0.3},
        "sequence": {"name": "ZZ", "tau": 0.02},
        "states": ["+Z", "+X"],
        "schedule": {"log_spaced": {"count": 8, "N_max": 200}},
    }
    document.update(overrides)
    return document


def _read_json(path):
    with open(path) as f:
        return json.load(f)


def test_zero_cycles_give_one_row_with_unit_fidelity(tmp_path):
    config = parse_experiment(_trajectory_doc(schedule={"log_spaced": {"N_max": 0}}))
    summary = run_experiment(config, out_dir=tmp_path, workers=1)
    assert len(summary['files']) == 4
    for path in summary['files']:
        table = ResultTable.read_csv(path)
        assert len(table.rows) == 1
        assert table.rows[0][:2] == [0.0, 0.0]
        assert table.rows[0][2:] == pytest.approx([1.0, 1.0], abs=1e-12)


def test_trajectory_files_and_provenance(tmp_path):
    config = parse_experiment(_trajectory_doc())
    summary = run_experiment(config, out_dir=tmp_path, workers=1)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "trajectory_pX_seed1.csv", "trajectory_pX_seed2.csv",
        "trajectory_pZ_seed1.csv", "trajectory_pZ_seed2.csv",
    ]
    assert summary['config_hash'] == config.config_hash()

    table = ResultTable.read_csv(tmp_path / "trajectory_pZ_seed2.csv")
    assert table.config_hash == config.config_hash()
    assert table.seed == 2
    assert table.columns == ["cycle_index", "time", "fidelity", "purity"]
    assert table.column("cycle_index")[-1] == 200
    assert table.column("time")[-1] == pytest.approx(200 * 0.04)
    assert min(table.column("fidelity")) > 0.99


def test_output_is_byte_identical_across_runs(tmp_path):
    config = parse_experiment(_trajectory_doc())
    first = run_experiment(config, out_dir=tmp_path / "a", workers=1)
    second = run_experiment(config, out_dir=tmp_path / "b", workers=1)
    for a, b in zip(first['files'], second['files']):
        with open(a, 'rb') as fa, open(b, 'rb') as fb:
            assert fa.read() == fb.read()


def test_output_dir_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('POINTER_OUTPUT_DIR', str(tmp_path / "env"))
    reset_simulation_config()
    config = parse_experiment(_trajectory_doc(seeds=[1], states=["+Z"], schedule={"explicit": [0, 1]}))
    run_experiment(config)
    assert (tmp_path / "env" / "trajectory_pZ_seed1.csv").exists()


def test_document_output_wins_over_default(tmp_path):
    config = parse_experiment(_trajectory_doc(
        seeds=[1], states=["+Z"], schedule={"explicit": [0, 1]}, output=str(tmp_path / "doc"),
    ))
    run_experiment(config)
    assert (tmp_path / "doc" / "trajectory_pZ_seed1.csv").exists()


def test_build_sequence_variants():
    uhrig = parse_experiment(_trajectory_doc(sequence={"name": "ZZ", "tau": 0.01, "uhrig": True, "n_pulses": 3}))
    seq = build_sequence(uhrig.sequence, 1, seed=0)
    assert seq.T_c == pytest.approx(0.04)

    desym = parse_experiment(_trajectory_doc(sequence={"name": "ZZ", "tau": 0.01, "desymmetrize": "X"}))
    assert build_sequence(desym.sequence, 1, seed=0).ideal

    noisy = parse_experiment(_trajectory_doc(sequence={"name": "XYXY", "tau": 0.01, "errors": {"eta": 0.02}}))
    assert not build_sequence(noisy.sequence, 1, seed=0).ideal
    assert build_sequence(noisy.sequence, 1, seed=0, eta=0.0).ideal

    explicit = parse_experiment(_trajectory_doc(sequence={
        "name": "ZZ", "tau": 0.01, "errors": {"actions": {"Z": [[0, 0], [0, 0]]}},
    }))
    errored = build_sequence(explicit.sequence, 1, seed=0)
    ideal = build_sequence(parse_experiment(_trajectory_doc()).sequence, 1, seed=0, tau=0.01)
    assert len(errored.unitaries) == len(ideal.unitaries)
    for a, b in zip(errored.unitaries, ideal.unitaries):
        assert np.allclose(a, b)


def test_sweep_writes_table_and_fit(tmp_path):
    config = parse_experiment({
        "kind": "sweep",
        "model": {"n_B": 2, "beta_cap": 0.2},
        "sequence": {"name": "ZZ", "tau": 0.01},
        "states": ["0"],
        "schedule": {"log_spaced": {"count": 10, "N_max": 200}},
        "sweep": {"tau": [0.01, 0.02], "n_B": [1, 2], "seeds": [3]},
    })
    summary = run_experiment(config, out_dir=tmp_path, workers=1)
    table = ResultTable.read_csv(tmp_path / "sweep.csv")
    assert len(table.rows) == 4
    assert table.column("tau") == [0.01, 0.01, 0.02, 0.02]
    assert all(loss > 0 for loss in table.column("saturation_loss"))

    report = _read_json(tmp_path / "fit.json")
    assert report['provenance']['config_hash'] == config.config_hash()
    assert report['grid_points'] == 4
    assert report['fit']['n_points'] == 4
    assert summary['fit']['alpha'] == report['fit']['alpha']


def test_semiclassical_longitudinal_field_keeps_pointer_state(tmp_path):
    config = parse_experiment({
        "kind": "semiclassical",
        "seed": 5,
        "sequence": {"name": "ZZ", "tau": 0.05},
        "field": {"distribution": "fixed-vector", "vector": [0.0, 0.0, 1.0], "n_samples": 4},
        "states": ["0"],
        "schedule": {"explicit": [0, 10, 100]},
    })
    run_experiment(config, out_dir=tmp_path, workers=1)
    table = ResultTable.read_csv(tmp_path / "semiclassical_0_seed5.csv")
    assert table.columns == ["cycle_index", "time", "fidelity_mean", "fidelity_stderr", "purity"]
    assert np.allclose(table.column("fidelity_mean"), 1.0, atol=1e-12)
    assert np.allclose(table.column("fidelity_stderr"), 0.0, atol=1e-12)


def test_esr_run(tmp_path):
    config = parse_experiment({
        "kind": "esr",
        "seed": 11,
        "sequence": {"name": "XYXY", "tau": 0.3},
        "esr": {"eps0": 0.05, "n0": 0.02, "b_z": 1.0, "n_draws": 3},
    })
    run_experiment(config, out_dir=tmp_path)
    table = ResultTable.read_csv(tmp_path / "esr.csv")
    assert len(table.rows) == 6
    assert table.column("cycle") == ["XYXY", "XZXZ"] * 3
    assert set(table.column("dominant_axis")) <= {"x", "y", "z"}

    summary = _read_json(tmp_path / "esr_summary.json")
    assert summary['n_draws'] == 3
    for counts in summary['dominant_axis_counts'].values():
        assert sum(counts.values()) == 3


def _e1_doc(**analysis):
    return {
        "kind": "analyze-cycle",
        "seed": 4,
        "model": {"n_qubits": 2, "n_B": 1, "beta_cap": 0.0},
        "sequence": {"name": "E1", "tau": 0.01},
        "analysis": analysis,
    }


def test_analyze_cycle_writes_report(tmp_path):
    config = parse_experiment(_e1_doc())
    summary = run_experiment(config, out_dir=tmp_path)
    report = _read_json(tmp_path / "analysis.json")
    assert report['provenance']['seed'] == 4
    assert report['decomposition']['dims'] == [4, 2]
    assert report['decomposition']['p'] == 1
    assert len(report['A']) == 2
    assert report['magnus_residual'] >= 0.0
    assert 'bounds' not in report
    assert summary['analysis']['sequence'] == report['sequence']


def test_degenerate_qubit_cycle_refuses_bounds():
    config = parse_experiment({
        "kind": "analyze-cycle",
        "model": {"n_qubits": 1, "n_B": 2, "beta_cap": 0.3},
        "sequence": {"name": "ZZ", "tau": 0.01},
        "analysis": {"T_total": 10.0},
    })
    with pytest.raises(ZeroGap):
        analyze_cycle(config)
    assert 'bounds' not in analyze_cycle(parse_experiment({**config.raw, "analysis": {}}))
