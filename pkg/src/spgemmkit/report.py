"""Machine-readable benchmark reports: a JSON schema, deterministic run
ids, and CSV emission for plotting.

Every command builds a BenchReport; its JSON form validates against
REPORT_SCHEMA. The run id hashes the command, inputs, and flags - never
wall-clock readings - so re-running with identical flags reproduces the id
while time fields are free to differ.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable

import jsonschema

from .errors import BadConfig

__all__ = [
    "REPORT_SCHEMA",
    "BenchReport",
    "make_run_id",
    "three_sig",
    "gflops",
    "validate_report",
    "write_csv",
    "aia_csv_rows",
]

ENGINE_VARIANTS = ("hash-engine", "naive-oracle")
SIM_MODES = ("baseline", "aia")

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "spgemmkit benchmark report",
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "run_id", "input", "environment", "results"],
    "properties": {
        "command": {
            "type": "string",
            "enum": ["spgemm", "aia", "mcl", "contract", "gnncheck", "corpus"],
        },
        "run_id": {"type": "string", "pattern": "^[0-9a-f]{16}$"},
        "input": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"type": "string"},
                "rows": {"type": "integer", "minimum": 0},
                "cols": {"type": "integer", "minimum": 0},
                "nnz": {"type": "integer", "minimum": 0},
                "second_input": {"type": ["string", "null"]},
            },
        },
        "environment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["worker_count", "seed", "numba"],
            "properties": {
                "worker_count": {"type": "integer", "minimum": 1},
                "seed": {"type": ["integer", "null"]},
                "numba": {"type": "boolean"},
                "cache": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "capacity_bytes": {"type": "integer", "minimum": 1},
                        "line_bytes": {"type": "integer", "minimum": 1},
                        "associativity": {"type": "integer", "minimum": 1},
                        "replacement": {"type": "string"},
                        "levels": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {
                        "type": "string",
                        "enum": ["engine", "sim", "app", "verify", "corpus"],
                    },
                    "variant": {"type": "string", "enum": list(ENGINE_VARIANTS)},
                    "mode": {"type": "string", "enum": list(SIM_MODES)},
                    "phase": {"type": "string"},
                    "total_ip": {"type": "integer", "minimum": 0},
                    "nnz_out": {"type": "integer", "minimum": 0},
                    "seconds": {
                        "type": "object",
                        "additionalProperties": {"type": "number", "minimum": 0},
                    },
                    "flops": {"type": "number", "minimum": 0},
                    "gflops": {"type": "number", "minimum": 0},
                    "round_trips": {"type": "integer", "minimum": 0},
                    "accesses": {"type": "integer", "minimum": 0},
                    "hits": {"type": "integer", "minimum": 0},
                    "misses": {"type": "integer", "minimum": 0},
                    "hit_ratio": {"type": "number", "minimum": 0, "maximum": 1},
                    "bytes_moved": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}


def three_sig(x: float) -> float:
    """Round to three significant digits (0 stays 0)."""
    return float(f"{x:.3g}") if x else 0.0


def gflops(flops: float) -> float:
    return three_sig(flops / 1e9)


def make_run_id(command: str, payload: dict) -> str:
    """16-hex-digit id over the command and a canonicalized payload of
    inputs and flags; wall-clock values must not be included."""
    canonical = json.dumps({"command": command, **payload}, sort_keys=True,
                           separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def validate_report(document: dict) -> None:
    try:
        jsonschema.validate(document, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise BadConfig(f"report does not match the published schema: {exc.message}") from exc


@dataclass
class BenchReport:
    command: str
    run_id: str
    input: dict
    environment: dict
    results: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "run_id": self.run_id,
            "input": dict(self.input),
            "environment": dict(self.environment),
            "results": [dict(r) for r in self.results],
        }

    def to_json(self) -> str:
        document = self.to_dict()
        validate_report(document)
        return json.dumps(document, indent=2, sort_keys=True) + "\n"

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


def write_csv(path, fieldnames: list[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


AIA_CSV_FIELDS = ["matrix", "phase", "mode", "round_trips", "accesses", "hit_ratio"]


def aia_csv_rows(matrix_name: str, mode_report) -> list[dict]:
    """Plot-ready rows for the cache-mode comparison."""
    rows = []
    for phase, cells in mode_report.phases.items():
        for mode, cell in cells.items():
            rows.append({
                "matrix": matrix_name,
                "phase": phase,
                "mode": mode,
                "round_trips": cell.round_trips,
                "accesses": cell.accesses,
                "hit_ratio": f"{cell.hit_ratio:.6f}",
            })
    return rows
