import json

import pytest

from backend.quantum.errors import ConfigInvalid
from config.experiment_config import config_hash, load_experiment, parse_experiment


def _trajectory(**overrides):
    document = {
        "kind": "trajectory",
        "seeds": [1, 2],
        "model": {"n_qubits": 1, "n_B": 3, "J_cap": 1.0, "beta_cap": 0.0},
        "sequence": {"name": "ZZ", "tau": 0.01},
        "states": ["+Z", "+X"],
        "schedule": {"log_spaced": {"count": 10, "N_max": 100}},
    }
    document.update(overrides)
    return document


def _field_path(document) -> str:
    with pytest.raises(ConfigInvalid) as info:
        parse_experiment(document)
    return info.value.field_path


def test_trajectory_document_parses():
    config = parse_experiment(_trajectory())
    assert config.kind == "trajectory"
    assert config.seeds == (1, 2)
    assert config.seed == 1
    assert config.model.n_B == 3
    assert config.sequence.name == "ZZ"
    assert [s.label for s in config.states] == ["+Z", "+X"]
    indices = config.schedule.indices()
    assert indices[0] == 0 and indices[-1] == 100


def test_missing_and_invalid_fields_name_their_path():
    assert _field_path(_trajectory(sequence={"name": "ZZ"})) == "sequence.tau"
    assert _field_path(_trajectory(sequence={"name": "ZZ", "tau": -1.0})) == "sequence.tau"
    assert _field_path(_trajectory(sequence={"name": "E1", "tau": 0.1})) == "sequence.name"
    assert _field_path(_trajectory(states=["+Z", "bogus"])) == "states[1]"
    assert _field_path(_trajectory(model={"n_qubits": 3})) == "model.n_qubits"
    assert _field_path(_trajectory(kind="teleport")) == "kind"
    assert _field_path(_trajectory(seeds=[1, -2])) == "seeds[1]"
    assert _field_path({"model": {}}) == "kind"
    assert _field_path([1, 2]) == "$"


def test_amplitude_states():
    config = parse_experiment(_trajectory(states=[{"label": "tilted", "amplitudes": [0.6, [0.0, 0.8]]}]))
    assert config.states[0].label == "tilted"
    assert config.states[0].amplitudes == (0.6 + 0j, 0.8j)
    assert _field_path(_trajectory(states=[{"amplitudes": [1.0, 1.0]}])) == "states[0].amplitudes"
    assert _field_path(_trajectory(states=[{"amplitudes": [1.0]}])) == "states[0].amplitudes"


def test_explicit_schedule_must_increase():
    config = parse_experiment(_trajectory(schedule={"explicit": [0, 5, 50]}))
    assert config.schedule.indices() == [0, 5, 50]
    assert _field_path(_trajectory(schedule={"explicit": [0, 5, 5]})) == "schedule.explicit"


def test_error_section_is_exclusive():
    sequence = {"name": "ZZ", "tau": 0.01, "errors": {"eta": 0.01, "actions": {"Z": [[1, 0], [0, 1]]}}}
    assert _field_path(_trajectory(sequence=sequence)) == "sequence.errors"
    sequence["errors"] = {"actions": {"Z": [[1, 0], [0]]}}
    assert _field_path(_trajectory(sequence=sequence)) == "sequence.errors.actions.Z"


def test_desymmetrize_and_uhrig_restrictions():
    assert _field_path(_trajectory(sequence={"name": "XYXY", "tau": 0.01, "uhrig": True})) == "sequence.uhrig"
    assert _field_path(_trajectory(sequence={"name": "ZZ", "tau": 0.01, "desymmetrize": "H"})) == "sequence.desymmetrize"
    config = parse_experiment(_trajectory(sequence={"name": "ZZ", "tau": 0.01, "desymmetrize": "X"}))
    assert config.sequence.desymmetrize == "X"


def test_other_kinds():
    sweep = parse_experiment({
        "kind": "sweep",
        "model": {"n_B": 2},
        "sequence": {"name": "ZZ", "tau": 0.01},
        "sweep": {"tau": [0.01, 0.02], "n_B": [2, 3], "abscissa": "tauA_sqrt_nB"},
    })
    assert sweep.sweep.n_B == (2, 3)
    assert sweep.states[0].label == "0"

    field = parse_experiment({
        "kind": "semiclassical",
        "sequence": {"name": "ZZ", "tau": 0.01},
        "field": {"distribution": "fixed-vector", "vector": [0.0, 0.0, 1.0]},
        "states": ["+X"],
    })
    assert field.field_spec.vector == (0.0, 0.0, 1.0)

    esr = parse_experiment({"kind": "esr", "esr": {"eps0": 0.1, "n0": 0.05, "n_draws": 3}})
    assert esr.esr.cycles == ("XYXY", "XZXZ")
    assert esr.sequence.name == "XYXY"

    analysis = parse_experiment({
        "kind": "analyze-cycle",
        "model": {"n_qubits": 2, "n_B": 1},
        "sequence": {"name": "E1", "tau": 0.01},
        "analysis": {"T_total": 5.0},
    })
    assert analysis.analysis.T_total == 5.0

    assert _field_path({"kind": "sweep", "sequence": {"name": "ZZ", "tau": 0.1},
                        "sweep": {"tau": [0.1], "n_B": [1], "abscissa": "tau"}}) == "sweep.abscissa"
    assert _field_path({"kind": "semiclassical", "sequence": {"name": "ZZ", "tau": 0.1},
                        "field": {"distribution": "uniform"}}) == "field.distribution"
    assert _field_path({"kind": "esr", "esr": {"cycles": ["ZZ"]}}) == "esr.cycles"


def test_hash_ignores_key_order():
    document = _trajectory()
    reordered = json.loads(json.dumps(dict(reversed(list(document.items())))))
    assert config_hash(document) == config_hash(reordered)
    assert parse_experiment(document).config_hash() == parse_experiment(reordered).config_hash()
    assert config_hash(document) != config_hash(_trajectory(seeds=[3]))


def test_with_seed_replaces_every_seed():
    config = parse_experiment({
        "kind": "sweep",
        "seeds": [1, 2],
        "sequence": {"name": "ZZ", "tau": 0.01},
        "sweep": {"tau": [0.01], "n_B": [2], "seeds": [4, 5]},
    })
    reseeded = config.with_seed(9)
    assert reseeded.seeds == (9,)
    assert reseeded.sweep.seeds == (9,)
    assert config.seeds == (1, 2)
    assert reseeded.config_hash() != config.config_hash()


def test_load_experiment(tmp_path):
    path = tmp_path / "zz.json"
    path.write_text(json.dumps(_trajectory()))
    assert load_experiment(path).kind == "trajectory"

    with pytest.raises(ConfigInvalid):
        load_experiment(tmp_path / "missing.json")

    broken = tmp_path / "broken.json"
    broken.write_text('{"kind": "trajectory", ')
    with pytest.raises(ConfigInvalid):
        load_experiment(broken)
