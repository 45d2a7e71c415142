"""Building blocks shared by the simulated environments."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..confidence import Monotonicity
from ..kernel_gp import KernelSpec, Observation

__all__ = [
    "Unknown",
    "SafetyConstraint",
    "ReferenceSignal",
    "reference_signal",
    "TrackingScenario",
    "ScenarioError",
]


class ScenarioError(ValueError):
    pass


@dataclass
class Unknown:
    """An unknown characteristic ``p`` with its GP prior and ground truth.

    ``columns`` selects the decision components the GP sees. ``truth`` maps an
    ``(m, len(columns))`` array to ``m`` noise-free values.
    """

    name: str
    kernel: KernelSpec
    noise_variance: float
    noise_std: float
    columns: tuple
    truth: Callable[[np.ndarray], np.ndarray]
    seed_inputs: np.ndarray

    @property
    def input_dim(self) -> int:
        return len(self.columns)

    def inputs(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X)[:, list(self.columns)]


@dataclass
class SafetyConstraint:
    """``g(delta, p) <= threshold`` (sense ``"le"``) or ``>= threshold`` (``"ge"``).

    ``g_form`` is vectorized: ``delta`` is whatever the scenario's known-term
    evaluator returns for a batch, ``p`` has shape ``(m, d)``.
    """

    g_form: Callable
    monotonicity: Sequence[Monotonicity]
    threshold: float
    sense: str = "le"

    def __post_init__(self):
        if self.sense not in ("le", "ge"):
            raise ValueError(f"sense must be 'le' or 'ge', got {self.sense!r}")
        self.monotonicity = tuple(Monotonicity.parse(m) for m in self.monotonicity)


@dataclass(frozen=True)
class ReferenceSignal:
    """Piecewise-constant goal: ``segments`` is a sequence of ``(duration, level)``."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((int(d), float(v)) for d, v in self.segments)
        if not segs:
            raise ValueError("reference needs at least one segment")
        for d, v in segs:
            if d < 1:
                raise ValueError(f"segment duration must be >= 1, got {d}")
            if v < 0:
                raise ValueError(f"reference level must be >= 0, got {v}")
        object.__setattr__(self, "segments", segs)

    @property
    def horizon(self) -> int:
        return sum(d for d, _ in self.segments)

    def level(self, t: int) -> float:
        return reference_signal(self, t)

    def plateau_index(self, t: int) -> tuple[int, int]:
        """``(segment index, 1-based position inside the segment)`` of step ``t``."""
        start = 0
        for i, (d, _) in enumerate(self.segments):
            if t <= start + d:
                return i, t - start
            start += d
        raise IndexError(f"step {t} beyond horizon {self.horizon}")

    @classmethod
    def constant(cls, level: float, steps: int) -> "ReferenceSignal":
        return cls(((steps, level),))

    @classmethod
    def from_csv(cls, text: str) -> "ReferenceSignal":
        """Rows of ``duration,level``; a header row is optional."""
        segs = []
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and not row[0].strip().lstrip("-").replace(".", "", 1).isdigit():
                continue
            if len(row) != 2:
                raise ScenarioError(f"line {lineno}: expected 'duration,level', got {row}")
            try:
                segs.append((int(row[0]), float(row[1])))
            except ValueError as exc:
                raise ScenarioError(f"line {lineno}: {exc}") from None
        return cls(tuple(segs))

    def to_csv(self) -> str:
        lines = ["duration,level"] + [f"{d},{v!r}" for d, v in self.segments]
        return "\n".join(lines) + "\n"


def reference_signal(signal: ReferenceSignal, t: int) -> float:
    """Level of the segment containing step ``t`` (1-based)."""
    if t < 1:
        raise IndexError(f"steps are 1-based, got {t}")
    i, _ = signal.plateau_index(t)
    return signal.segments[i][1]


def _sum_g(delta, p):
    return np.sum(p, axis=1)


@dataclass
class TrackingScenario:
    """Deliver a reference with the summed output of several units.

    Each unknown is the output characteristic of one unit as a function of its
    own decision variable(s). The summed output must stay at or below
    ``limit``; the decision cost is the squared tracking error of the
    predicted sum.
    """

    name: str
    bounds: np.ndarray
    unknowns: list
    reference: ReferenceSignal
    limit: float
    zeta: float
    margin: float = 5.0
    safety: list = field(default_factory=list)

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float)
        if not self.safety:
            self.safety = [
                SafetyConstraint(_sum_g, [Monotonicity.INCREASING] * len(self.unknowns), self.limit)
            ]
        self.validate_seeds()

    @property
    def horizon(self) -> int:
        return self.reference.horizon

    @property
    def n_unknowns(self) -> int:
        return len(self.unknowns)

    def goal(self, t: int) -> float:
        return self.reference.level(t)

    def known_terms(self, X):
        return None

    def cost(self, X, means, goal) -> np.ndarray:
        return (goal - np.sum(means, axis=1)) ** 2

    def true_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([u.truth(u.inputs(X)) for u in self.unknowns])

    def produced(self, X) -> np.ndarray:
        return np.sum(self.true_values(X), axis=1)

    def achievable(self, goal: float) -> float:
        return min(goal, self.limit)

    def regret(self, goal: float, X) -> float:
        return float(abs(self.achievable(goal) - self.produced(X)[0]))

    def observe(self, X, rng: np.random.Generator) -> np.ndarray:
        v = self.true_values(X)[0]
        noise = np.array([u.noise_std for u in self.unknowns])
        return v + noise * rng.standard_normal(v.size)

    def initial_decision(self) -> np.ndarray:
        x = np.zeros(self.bounds.shape[0])
        for u in self.unknowns:
            x[list(u.columns)] = u.seed_inputs[0]
        return x

    def seed_decisions(self) -> np.ndarray:
        """Joint decisions formed by pairing the k-th seed of every unknown."""
        k = min(len(u.seed_inputs) for u in self.unknowns)
        X = np.zeros((k, self.bounds.shape[0]))
        for u in self.unknowns:
            X[:, list(u.columns)] = u.seed_inputs[:k]
        return X

    def seed_observations(self, rng: np.random.Generator) -> list:
        sets = []
        for u in self.unknowns:
            vals = u.truth(u.seed_inputs)
            noisy = vals + u.noise_std * rng.standard_normal(vals.size)
            sets.append([Observation.of(x, y) for x, y in zip(u.seed_inputs, noisy)])
        return sets

    def validate_seeds(self) -> None:
        """Every seed must be safe with all other units at their lower bound."""
        lo = self.bounds[:, 0]
        for u in self.unknowns:
            for s in u.seed_inputs:
                X = lo.copy()
                X[list(u.columns)] = s
                total = float(self.produced(X)[0])
                if total > self.limit:
                    raise ScenarioError(
                        f"seed {s.tolist()} of {u.name} is unsafe: {total:.4g} > {self.limit}"
                    )

    def exploration_rule(self, state, goal) -> bool:
        """Open when the goal repeats and was met within ``margin`` last step."""
        if not state.rows:
            return False
        last = state.rows[-1]
        return goal == last.goal and abs(sum(last.observed) - last.goal) <= self.margin
