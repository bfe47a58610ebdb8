"""Trajectory CSV reading and schema validation.

The expected layout is the one the simulator CLI emits: any number of
leading `#` comment lines (config hash and canonical config), a header
row, then one numeric row per sample. Only the time column and the four
population columns are required here; extra columns pass through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REQUIRED = ("t_over_omegaR", "N_1", "N_2", "N_3", "N_4")


class SchemaError(ValueError):
    """Input file does not match the trajectory CSV contract."""


@dataclass(frozen=True)
class TrajectoryTable:
    names: tuple[str, ...]
    data: np.ndarray  # shape (n_samples, n_columns)

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise SchemaError(f"no column named {name!r}")
        return self.data[:, self.names.index(name)]

    @property
    def times(self) -> np.ndarray:
        return self.column("t_over_omegaR")

    @property
    def populations(self) -> np.ndarray:
        return np.column_stack([self.column(f"N_{i}") for i in range(1, 5)])


def read_table(path: str) -> TrajectoryTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise SchemaError(f"{path}: no header row")
    names = tuple(part.strip() for part in lines[0].strip().split(","))
    missing = [name for name in REQUIRED if name not in names]
    if missing:
        raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
    if len(lines) == 1:
        raise SchemaError(f"{path}: empty trajectory (no samples)")
    try:
        data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    except ValueError as exc:
        raise SchemaError(f"{path}: malformed numeric row ({exc})") from None
    if data.shape[1] != len(names):
        raise SchemaError(f"{path}: rows have {data.shape[1]} fields, "
                          f"header has {len(names)}")
    return TrajectoryTable(names=names, data=data)
