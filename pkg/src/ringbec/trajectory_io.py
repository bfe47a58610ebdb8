"""Trajectory and report serialization.

CSV columns, in order: t_over_omegaR, N_1..N_n, theta_1..theta_n
(unwrapped), J_1..J_n, energy, winding.  Values are printed with 17
significant digits so a re-parse reproduces the doubles exactly.  Files
are written atomically (write to a temporary name, then rename).
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, is_dataclass

import numpy as np

from .config import RunConfig, config_hash, serialize_config
from .errors import ParameterError
from .integrator import Trajectory

_FMT = "%.17g"


def trajectory_columns(n_wells: int) -> list[str]:
    return (["t_over_omegaR"]
            + [f"N_{i}" for i in range(1, n_wells + 1)]
            + [f"theta_{i}" for i in range(1, n_wells + 1)]
            + [f"J_{i}" for i in range(1, n_wells + 1)]
            + ["energy", "winding"])


def _table(traj: Trajectory) -> np.ndarray:
    return np.column_stack([traj.times, traj.populations, traj.phases,
                            traj.currents, traj.energy, traj.winding])


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_trajectory(traj: Trajectory, path: str, fmt: str = "csv",
                     config: RunConfig | None = None) -> None:
    """Serialize a trajectory; the header carries the config hash."""
    digest = config_hash(config) if config is not None else "none"
    if fmt == "csv":
        lines = [f"# config-sha256: {digest}"]
        if config is not None:
            lines += ["# config: " + line
                      for line in serialize_config(config).splitlines()
                      if line]
        lines.append(",".join(trajectory_columns(traj.params.n_wells)))
        table = _table(traj)
        for row in table:
            lines.append(",".join(_FMT % v for v in row))
        _atomic_write(path, "\n".join(lines) + "\n")
        return
    if fmt == "jsonl":
        cols = trajectory_columns(traj.params.n_wells)
        table = _table(traj)
        lines = [json.dumps({"config_sha256": digest, "columns": cols})]
        for row in table:
            lines.append(json.dumps(dict(zip(cols, row.tolist()))))
        _atomic_write(path, "\n".join(lines) + "\n")
        return
    raise ParameterError(f"unknown format {fmt!r}; use 'csv' or 'jsonl'")


@dataclass(frozen=True)
class TrajectoryTable:
    """Columns and data re-read from a serialized trajectory."""

    columns: list[str]
    data: np.ndarray
    config_sha256: str

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ParameterError(f"no column named {name!r}")
        return self.data[:, self.columns.index(name)]


def read_trajectory(path: str) -> TrajectoryTable:
    """Re-parse a CSV or JSONL trajectory file."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines:
        raise ParameterError(f"{path} is empty")
    if lines[0].startswith("{"):
        head = json.loads(lines[0])
        cols = list(head["columns"])
        rows = [[float(json.loads(line)[c]) for c in cols]
                for line in lines[1:] if line]
        data = np.array(rows) if rows else np.empty((0, len(cols)))
        return TrajectoryTable(cols, data, str(head.get("config_sha256",
                                                        "none")))
    digest = "none"
    header = None
    rows = []
    for line in lines:
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# config-sha256:"):
                digest = line.split(":", 1)[1].strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise ParameterError(f"{path} has no header row")
    data = np.array(rows) if rows else np.empty((0, len(header)))
    return TrajectoryTable(header, data, digest)


def write_report(report, path: str) -> None:
    """Serialize a report (dataclass or dict) as indented JSON."""
    payload = asdict(report) if is_dataclass(report) else dict(report)
    _atomic_write(path, json.dumps(payload, indent=2, default=_jsonable)
                  + "\n")


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")
