"""
Experiment documents.

One experiment per JSON file. The document is parsed with yaml.safe_load
(JSON is accepted as-is), validated into typed sections, and hashed from
its canonical JSON form so every output can name the exact input that
produced it.

Example:

    {
      "kind": "trajectory",
      "seeds": [1, 2],
      "model": {"n_qubits": 1, "n_B": 6, "J_cap": 1.0, "beta_cap": 0.0},
      "sequence": {"name": "ZZ", "tau": 0.01},
      "states": ["+Z", "+X"],
      "schedule": {"log_spaced": {"count": 60, "N_max": 10000}},
      "output": "results/zz"
    }
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from backend.quantum.errors import ConfigInvalid, PointerStateError

KINDS = ("trajectory", "sweep", "semiclassical", "esr", "analyze-cycle")
QUBIT_SEQUENCES = ("ZZ", "XYXY", "XZXZ", "free")
EPR_SEQUENCES = ("E1", "E2", "E3")
ABSCISSAS = ("tauA", "tauA_sqrt_nB")


def _require(section: Dict, key: str, path: str):
    if key not in section:
        raise ConfigInvalid(f"{path}.{key}" if path else key, "is required")
    return section[key]


def _as_dict(value, path: str) -> Dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigInvalid(path, "must be an object")
    return value


def _number(value, path: str, positive: bool = False, nonnegative: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(path, f"must be a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ConfigInvalid(path, "must be finite")
    if positive and not value > 0:
        raise ConfigInvalid(path, f"must be > 0, got {value}")
    if nonnegative and value < 0:
        raise ConfigInvalid(path, f"must be >= 0, got {value}")
    return value


def _integer(value, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(path, f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigInvalid(path, f"must be >= {minimum}, got {value}")
    return value


def _number_list(value, path: str, **checks) -> List[float]:
    if not isinstance(value, list) or not value:
        raise ConfigInvalid(path, "must be a nonempty list")
    return [_number(v, f"{path}[{i}]", **checks) for i, v in enumerate(value)]


def _integer_list(value, path: str, minimum: Optional[int] = None) -> List[int]:
    if not isinstance(value, list) or not value:
        raise ConfigInvalid(path, "must be a nonempty list")
    return [_integer(v, f"{path}[{i}]", minimum) for i, v in enumerate(value)]


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSection:
    n_qubits: int = 1
    n_B: int = 1
    J_cap: float = 1.0
    beta_cap: float = 0.0
    K: Optional[float] = None


@dataclass(frozen=True)
class ErrorSection:
    """Either a random axis error of strength eta, or explicit error actions per label"""
    eta: Optional[float] = None
    actions: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None


@dataclass(frozen=True)
class SequenceSection:
    name: str
    tau: float
    errors: Optional[ErrorSection] = None
    uhrig: bool = False
    n_pulses: int = 2
    desymmetrize: Optional[str] = None


@dataclass(frozen=True)
class StateSpec:
    label: str
    amplitudes: Optional[Tuple[complex, ...]] = None


@dataclass(frozen=True)
class ScheduleSection:
    count: int = 60
    N_max: int = 1000
    explicit: Optional[Tuple[int, ...]] = None

    def indices(self) -> List[int]:
        from backend.quantum.propagate import log_schedule

        if self.explicit is not None:
            return list(self.explicit)
        return log_schedule(self.count, self.N_max)


@dataclass(frozen=True)
class SweepSection:
    tau: Tuple[float, ...]
    n_B: Tuple[int, ...]
    seeds: Tuple[int, ...]
    eta: Tuple[float, ...] = (0.0,)
    abscissa: str = "tauA"


@dataclass(frozen=True)
class FieldSection:
    distribution: str = "isotropic-gaussian"
    B: float = 1.0
    vector: Optional[Tuple[float, float, float]] = None
    n_samples: int = 10000


@dataclass(frozen=True)
class ESRSection:
    eps0: float = 0.0
    n0: float = 0.0
    b_z: float = 0.0
    n_draws: int = 1
    cycles: Tuple[str, ...] = ("XYXY", "XZXZ")


@dataclass(frozen=True)
class AnalysisSection:
    T_total: Optional[float] = None
    monitored: int = 0
    pointer_basis: Optional[Tuple[str, ...]] = None
    p: Optional[int] = None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    raw: Dict = field(repr=False)
    seeds: Tuple[int, ...] = (0,)
    model: Optional[ModelSection] = None
    sequence: Optional[SequenceSection] = None
    states: Tuple[StateSpec, ...] = ()
    schedule: ScheduleSection = ScheduleSection()
    sweep: Optional[SweepSection] = None
    field_spec: Optional[FieldSection] = None
    esr: Optional[ESRSection] = None
    analysis: AnalysisSection = AnalysisSection()
    output: Optional[str] = None

    @property
    def seed(self) -> int:
        return self.seeds[0]

    def config_hash(self) -> str:
        return config_hash(self.raw)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """--seed override: replaces every seed in the document"""
        raw = copy.deepcopy(self.raw)
        raw.pop('seed', None)
        raw['seeds'] = [int(seed)]
        if 'sweep' in raw and isinstance(raw['sweep'], dict):
            raw['sweep']['seeds'] = [int(seed)]
        return parse_experiment(raw)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def canonical_json(document: Dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(',', ':'), ensure_ascii=True)


def config_hash(document: Dict) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON document"""
    return hashlib.sha256(canonical_json(document).encode('utf-8')).hexdigest()


def _parse_model(section, path: str) -> ModelSection:
    section = _as_dict(section, path)
    model = ModelSection(
        n_qubits=_integer(section.get('n_qubits', 1), f"{path}.n_qubits"),
        n_B=_integer(section.get('n_B', 1), f"{path}.n_B", minimum=1),
        J_cap=_number(section.get('J_cap', 1.0), f"{path}.J_cap", positive=True),
        beta_cap=_number(section.get('beta_cap', 0.0), f"{path}.beta_cap", nonnegative=True),
        K=None if section.get('K') is None else _number(section['K'], f"{path}.K"),
    )
    if model.n_qubits not in (1, 2):
        raise ConfigInvalid(f"{path}.n_qubits", "must be 1 or 2")
    return model


def _parse_errors(section, path: str) -> Optional[ErrorSection]:
    if section is None:
        return None
    section = _as_dict(section, path)
    eta = section.get('eta')
    actions = section.get('actions')
    if (eta is None) == (actions is None):
        raise ConfigInvalid(path, "give exactly one of 'eta' or 'actions'")
    if eta is not None:
        eta = _number(eta, f"{path}.eta", nonnegative=True)
    if actions is not None:
        actions = _as_dict(actions, f"{path}.actions")
        for label, matrix in actions.items():
            _matrix(matrix, f"{path}.actions.{label}")
    seed = section.get('seed')
    return ErrorSection(eta=eta, actions=actions, seed=None if seed is None else _integer(seed, f"{path}.seed"))


def _complex(value, path: str) -> complex:
    if isinstance(value, list) and len(value) == 2:
        return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))
    return complex(_number(value, path))


def _matrix(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ConfigInvalid(path, "must be a list of rows")
    rows = [[_complex(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(value)]
    if any(len(row) != len(rows) for row in rows):
        raise ConfigInvalid(path, "must be square")
    return np.array(rows, dtype=complex)


def _parse_sequence(section, path: str, n_qubits: int) -> SequenceSection:
    section = _as_dict(section, path)
    name = _require(section, 'name', path)
    known = QUBIT_SEQUENCES if n_qubits == 1 else EPR_SEQUENCES
    if name not in known:
        raise ConfigInvalid(f"{path}.name", f"unknown sequence '{name}' for {n_qubits} qubit(s); expected one of {known}")
    tau = _number(_require(section, 'tau', path), f"{path}.tau", positive=True)
    uhrig = bool(section.get('uhrig', False))
    n_pulses = _integer(section.get('n_pulses', 2), f"{path}.n_pulses", minimum=1)
    if uhrig and name != "ZZ":
        raise ConfigInvalid(f"{path}.uhrig", "Uhrig timing is available for the ZZ reflection only")
    desym = section.get('desymmetrize')
    if desym is not None and desym not in ("X", "Y", "Z"):
        raise ConfigInvalid(f"{path}.desymmetrize", "must name a qubit pulse X, Y or Z")
    if desym is not None and (n_qubits != 1 or name not in ("ZZ",)):
        raise ConfigInvalid(f"{path}.desymmetrize", "applies to the uniform ZZ cycle")
    return SequenceSection(
        name=name,
        tau=tau,
        errors=_parse_errors(section.get('errors'), f"{path}.errors"),
        uhrig=uhrig,
        n_pulses=n_pulses,
        desymmetrize=desym,
    )


def _parse_states(value, path: str, n_qubits: int) -> Tuple[StateSpec, ...]:
    from backend.quantum.model import named_state

    if not isinstance(value, list) or not value:
        raise ConfigInvalid(path, "must be a nonempty list of states")
    states = []
    for i, entry in enumerate(value):
        item_path = f"{path}[{i}]"
        if isinstance(entry, str):
            try:
                named_state(entry, n_qubits)
            except PointerStateError as e:
                raise ConfigInvalid(item_path, str(e))
            states.append(StateSpec(label=entry))
            continue
        entry = _as_dict(entry, item_path)
        amplitudes = _require(entry, 'amplitudes', item_path)
        if not isinstance(amplitudes, list) or len(amplitudes) != 2 ** n_qubits:
            raise ConfigInvalid(f"{item_path}.amplitudes", f"must list {2 ** n_qubits} amplitudes")
        vector = tuple(_complex(a, f"{item_path}.amplitudes[{j}]") for j, a in enumerate(amplitudes))
        if abs(np.linalg.norm(vector) - 1.0) > 1e-10:
            raise ConfigInvalid(f"{item_path}.amplitudes", "state is not normalized")
        states.append(StateSpec(label=str(entry.get('label', f"state{i}")), amplitudes=vector))
    return tuple(states)


def _parse_schedule(section, path: str) -> ScheduleSection:
    section = _as_dict(section, path)
    if 'explicit' in section:
        explicit = _integer_list(section['explicit'], f"{path}.explicit", minimum=0)
        if any(b <= a for a, b in zip(explicit, explicit[1:])):
            raise ConfigInvalid(f"{path}.explicit", "must be strictly increasing")
        return ScheduleSection(explicit=tuple(explicit))
    spaced = _as_dict(section.get('log_spaced'), f"{path}.log_spaced")
    from config.simulation_config import get_setting

    return ScheduleSection(
        count=_integer(spaced.get('count', get_setting('schedule.log_points', 60)), f"{path}.log_spaced.count", minimum=1),
        N_max=_integer(spaced.get('N_max', 1000), f"{path}.log_spaced.N_max", minimum=0),
    )


def _parse_sweep(section, path: str) -> SweepSection:
    section = _as_dict(section, path)
    abscissa = section.get('abscissa', 'tauA')
    if abscissa not in ABSCISSAS:
        raise ConfigInvalid(f"{path}.abscissa", f"must be one of {ABSCISSAS}")
    return SweepSection(
        tau=tuple(_number_list(_require(section, 'tau', path), f"{path}.tau", positive=True)),
        n_B=tuple(_integer_list(_require(section, 'n_B', path), f"{path}.n_B", minimum=1)),
        seeds=tuple(_integer_list(section.get('seeds', [0]), f"{path}.seeds")),
        eta=tuple(_number_list(section.get('eta', [0.0]), f"{path}.eta", nonnegative=True)),
        abscissa=abscissa,
    )


def _parse_field(section, path: str) -> FieldSection:
    section = _as_dict(section, path)
    distribution = section.get('distribution', 'isotropic-gaussian')
    from backend.quantum.semiclassical import DISTRIBUTIONS

    if distribution not in DISTRIBUTIONS:
        raise ConfigInvalid(f"{path}.distribution", f"must be one of {DISTRIBUTIONS}")
    vector = section.get('vector')
    if distribution == "fixed-vector":
        vector = tuple(_number_list(_require(section, 'vector', path), f"{path}.vector"))
        if len(vector) != 3:
            raise ConfigInvalid(f"{path}.vector", "must have three components")
    return FieldSection(
        distribution=distribution,
        B=_number(section.get('B', 1.0), f"{path}.B", positive=True),
        vector=vector,
        n_samples=_integer(section.get('n_samples', 10000), f"{path}.n_samples", minimum=1),
    )


def _parse_esr(section, path: str) -> ESRSection:
    section = _as_dict(section, path)
    cycles = section.get('cycles', ["XYXY", "XZXZ"])
    if not isinstance(cycles, list) or not cycles or any(c not in ("XYXY", "XZXZ") for c in cycles):
        raise ConfigInvalid(f"{path}.cycles", "must list XYXY and/or XZXZ")
    return ESRSection(
        eps0=_number(section.get('eps0', 0.0), f"{path}.eps0", nonnegative=True),
        n0=_number(section.get('n0', 0.0), f"{path}.n0", nonnegative=True),
        b_z=_number(section.get('b_z', 0.0), f"{path}.b_z"),
        n_draws=_integer(section.get('n_draws', 1), f"{path}.n_draws", minimum=1),
        cycles=tuple(cycles),
    )


def _parse_analysis(section, path: str) -> AnalysisSection:
    section = _as_dict(section, path)
    basis = section.get('pointer_basis')
    if basis is not None:
        if not isinstance(basis, list) or not all(isinstance(b, str) for b in basis):
            raise ConfigInvalid(f"{path}.pointer_basis", "must be a list of state labels")
        basis = tuple(basis)
    T_total = section.get('T_total')
    p = section.get('p')
    return AnalysisSection(
        T_total=None if T_total is None else _number(T_total, f"{path}.T_total", positive=True),
        monitored=_integer(section.get('monitored', 0), f"{path}.monitored", minimum=0),
        pointer_basis=basis,
        p=None if p is None else _integer(p, f"{path}.p", minimum=1),
    )


def parse_experiment(document: Dict) -> ExperimentConfig:
    """
    Validate a raw experiment document.

    Raises:
        ConfigInvalid: with the dotted path of the first offending field
    """
    if not isinstance(document, dict):
        raise ConfigInvalid("$", "experiment document must be a JSON object")
    kind = _require(document, 'kind', "")
    if kind not in KINDS:
        raise ConfigInvalid("kind", f"must be one of {KINDS}, got {kind!r}")

    if 'seeds' in document:
        seeds = tuple(_integer_list(document['seeds'], "seeds", minimum=0))
    else:
        seeds = (_integer(document.get('seed', 0), "seed", minimum=0),)

    sections: Dict[str, Any] = {}
    if kind in ("trajectory", "sweep", "analyze-cycle"):
        sections['model'] = _parse_model(document.get('model'), "model")
        sections['sequence'] = _parse_sequence(
            _require(document, 'sequence', ""), "sequence", sections['model'].n_qubits
        )
    if kind in ("trajectory", "sweep", "semiclassical"):
        n_qubits = sections['model'].n_qubits if 'model' in sections else 1
        default_states = ["0"] if kind != "trajectory" else None
        states = document.get('states', default_states)
        if states is None:
            raise ConfigInvalid("states", "is required")
        sections['states'] = _parse_states(states, "states", n_qubits)
        sections['schedule'] = _parse_schedule(document.get('schedule'), "schedule")
    if kind == "sweep":
        sections['sweep'] = _parse_sweep(_require(document, 'sweep', ""), "sweep")
    if kind == "semiclassical":
        sections['field_spec'] = _parse_field(document.get('field'), "field")
        sequence = _as_dict(_require(document, 'sequence', ""), "sequence")
        sections['sequence'] = _parse_sequence(sequence, "sequence", 1)
    if kind == "esr":
        sections['esr'] = _parse_esr(_require(document, 'esr', ""), "esr")
        sequence = _as_dict(document.get('sequence', {'name': 'XYXY', 'tau': 1.0}), "sequence")
        sections['sequence'] = _parse_sequence(sequence, "sequence", 1)
    if kind == "analyze-cycle":
        sections['analysis'] = _parse_analysis(document.get('analysis'), "analysis")

    output = document.get('output')
    if output is not None and not isinstance(output, str):
        raise ConfigInvalid("output", "must be a directory path")

    return ExperimentConfig(kind=kind, raw=copy.deepcopy(document), seeds=seeds, output=output, **sections)


def load_experiment(path) -> ExperimentConfig:
    """Read and validate an experiment file"""
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid("$", f"config file not found: {path}")
    try:
        with open(path, 'r') as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigInvalid("$", f"not valid JSON: {e}")
    return parse_experiment(document)
