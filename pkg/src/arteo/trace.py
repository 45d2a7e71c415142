"""Per-step run records shared by both algorithms and the metrics."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class TraceRow:
    t: int
    goal: float
    decision: tuple
    pred_mean: tuple
    pred_std: tuple
    true_value: tuple
    observed: tuple
    z: float
    beta: float
    gamma: float
    margin: float
    status: str
    safety_hold: bool
    produced: float
    regret: float
    uncertainty: float
    solver_iterations: int = 0


@dataclass
class RunTrace:
    algorithm: str
    seed: int
    rows: list[TraceRow] = field(default_factory=list)
    partial: bool = False
    error: str = ""
    safe_sets: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError(f"trace steps must increase, got {row.t} after {self.rows[-1].t}")
        if row.regret < 0:
            raise ValueError("regret must be nonnegative")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def decisions(self) -> np.ndarray:
        return np.array([r.decision for r in self.rows], dtype=float)

    @property
    def hold_count(self) -> int:
        return sum(r.safety_hold for r in self.rows)


TRACE_FIELDS = [f.name for f in fields(TraceRow)]
