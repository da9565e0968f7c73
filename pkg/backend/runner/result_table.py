"""
Result tables with a provenance header.

CSV layout (gnuplot reads it directly with `set datafile separator ","`):

    # config_hash=<sha256> seed=<int> version=<artifact version>
    # <free-form comment lines, e.g. column units>
    cycle_index,time,fidelity,purity
    0,0,1,1
    ...

Floats are written with 17 significant digits so that values survive a
round trip exactly, and lines always end with LF.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def to_jsonable(value: Any) -> Any:
    """inf/nan become strings (JSON has no literal for them)"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, 'tolist'):
        return to_jsonable(value.tolist())
    if isinstance(value, complex):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, float):
        return value if math.isfinite(value) else format_value(value)
    return value


@dataclass
class ResultTable:
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    config_hash: str = ""
    seed: int = 0
    version: str = "1.0.0"
    comments: List[str] = field(default_factory=list)

    def add_row(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    @property
    def header(self) -> str:
        return f"# config_hash={self.config_hash} seed={self.seed} version={self.version}"

    def to_csv(self) -> str:
        lines = [self.header]
        lines.extend(f"# {comment}" for comment in self.comments)
        lines.append(",".join(self.columns))
        lines.extend(",".join(format_value(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='\n', encoding='utf-8') as f:
            f.write(self.to_csv())
        return path

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        """Parse a file written by write_csv (numbers come back as float)"""
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().split("\n")
        provenance = dict(part.split("=", 1) for part in lines[0][2:].split())
        comments, index = [], 1
        while lines[index].startswith("#"):
            comments.append(lines[index][2:])
            index += 1
        table = cls(
            columns=lines[index].split(","),
            config_hash=provenance.get('config_hash', ''),
            seed=int(provenance.get('seed', 0)),
            version=provenance.get('version', ''),
            comments=comments,
        )
        for line in lines[index + 1:]:
            if line:
                table.rows.append([_parse_cell(cell) for cell in line.split(",")])
        return table


def _parse_cell(cell: str) -> Any:
    try:
        return float(cell)
    except ValueError:
        return cell


def write_json_report(path, payload: Dict, config_hash: str, seed: int, version: str) -> Path:
    """JSON counterpart of the CSV header: provenance first, then the payload"""
    document = {
        'provenance': {'config_hash': config_hash, 'seed': seed, 'version': version},
        **to_jsonable(payload),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='\n', encoding='utf-8') as f:
        f.write(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path
