"""Trace metrics, searches over the exploration weight and a scaling probe."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .arteo_core import RunSettings, run
from .kernel_gp import KernelSpec, Observation, gp_condition
from .trace import RunTrace

__all__ = [
    "cumulative_regret",
    "total_uncertainty",
    "violation_count",
    "decision_changes",
    "ZRow",
    "grid_search_z",
    "BayesOptReport",
    "bayesopt_z",
    "ComplexityRow",
    "ComplexityReport",
    "complexity_probe",
    "DEFAULT_Z_GRID",
    "DEFAULT_SEARCH_SEEDS",
    "MAX_BO_EVALUATIONS",
]

DEFAULT_Z_GRID = (5.0, 10.0, 25.0, 50.0, 100.0)
DEFAULT_SEARCH_SEEDS = (0, 1, 2, 3, 4)
MAX_BO_EVALUATIONS = 35
VIOLATION_TOL = 1e-9


def cumulative_regret(trace: RunTrace) -> np.ndarray:
    if not trace.rows:
        raise ValueError("empty trace")
    return np.cumsum(trace.column("regret"))


def total_uncertainty(trace: RunTrace) -> np.ndarray:
    """Summed posterior std at the chosen decision, one entry per step."""
    if not trace.rows:
        raise ValueError("empty trace")
    return trace.column("uncertainty")


def violation_count(trace: RunTrace, limit: float) -> int:
    """Steps whose true constrained output exceeds ``limit``."""
    return int(np.sum(trace.column("produced") > limit + VIOLATION_TOL))


def decision_changes(trace: RunTrace, threshold: float = 0.1) -> int:
    """Steps where the decision moved by more than ``threshold`` (Euclidean)."""
    X = trace.decisions
    if len(X) < 2:
        return 0
    return int(np.sum(np.linalg.norm(np.diff(X, axis=0), axis=1) > threshold))


def terminal_regret(trace: RunTrace) -> float:
    return float(cumulative_regret(trace)[-1])


@dataclass(frozen=True)
class ZRow:
    z: float
    seeds: tuple
    terminal_regret: tuple

    @property
    def mean(self) -> float:
        return float(np.mean(self.terminal_regret))


def _mean_regret(scenario, settings, z, seeds) -> tuple:
    s = replace(settings, zeta=float(z))
    return tuple(terminal_regret(run(scenario, s, seed)) for seed in seeds)


def grid_search_z(
    candidates: Sequence[float],
    scenario,
    settings: RunSettings | None = None,
    seeds: Sequence[int] = DEFAULT_SEARCH_SEEDS,
) -> tuple[float, list[ZRow], bool]:
    """Mean terminal cumulative regret for each candidate ``z``.

    Returns
    -------
    best : float
        Argmin of the mean; ties go to the smaller ``z``.
    table : list of ZRow
        One row per candidate, in input order, all over the same seeds.
    unique : bool
        False when another candidate attains the same mean.
    """
    if not len(candidates):
        raise ValueError("need at least one candidate")
    settings = settings or RunSettings()
    seeds = tuple(int(s) for s in seeds)
    table = [ZRow(float(z), seeds, _mean_regret(scenario, settings, z, seeds)) for z in candidates]
    means = np.array([r.mean for r in table])
    best_val = means.min()
    tied = [r.z for r, m in zip(table, means) if m == best_val]
    return min(tied), table, len(tied) == 1


@dataclass
class BayesOptReport:
    z: np.ndarray
    values: np.ndarray
    incumbent: np.ndarray  # best value after each evaluation
    grid: np.ndarray
    mean: np.ndarray  # surrogate mean on ``grid`` after the last evaluation
    lower: np.ndarray
    upper: np.ndarray
    kappa: float

    @property
    def best_z(self) -> float:
        return float(self.z[int(np.argmin(self.values))])

    @property
    def best_value(self) -> float:
        return float(np.min(self.values))


def _surrogate(z, values, lo, hi):
    """Standardized-output GP over ``z``; returns a predictor in original units."""
    mu_y = float(np.mean(values))
    sd_y = float(np.std(values)) or 1.0
    kernel = KernelSpec("matern32", 0.2 * (hi - lo), 1.0)
    data = [Observation.of([zi], (vi - mu_y) / sd_y) for zi, vi in zip(z, values)]
    model = gp_condition(kernel, 1e-6, data, input_dim=1)

    def predict(q):
        m, s = model.predict(q)
        return mu_y + sd_y * m, sd_y * s

    return predict


def bayesopt_z(
    bounds: tuple[float, float],
    budget: int,
    objective: Callable[[float], float] | None = None,
    scenario=None,
    settings: RunSettings | None = None,
    seeds: Sequence[int] = DEFAULT_SEARCH_SEEDS,
    kappa: float = 2.0,
    n_grid: int = 512,
    n_init: int = 3,
    seed: int = 0,
) -> BayesOptReport:
    """Minimize ``objective(z)`` with a GP surrogate and a lower-confidence-bound rule.

    Without an explicit ``objective`` the mean terminal cumulative regret of
    ``scenario`` over ``seeds`` is used. The budget is capped at
    ``MAX_BO_EVALUATIONS``. Each round evaluates the grid point minimizing
    ``mean - kappa * std`` among points not yet evaluated.
    """
    lo, hi = map(float, bounds)
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if budget < n_init:
        raise ValueError(f"budget must be >= {n_init}")
    if objective is None:
        if scenario is None:
            raise ValueError("pass an objective or a scenario")
        settings = settings or RunSettings()

        def objective(z):
            return float(np.mean(_mean_regret(scenario, settings, z, seeds)))

    budget = min(int(budget), MAX_BO_EVALUATIONS)
    grid = np.linspace(lo, hi, n_grid)
    rng = np.random.default_rng(seed)
    init = np.sort(rng.choice(n_grid, size=n_init, replace=False))
    zs = list(grid[init])
    vals = [float(objective(z)) for z in zs]
    taken = set(init.tolist())

    while len(zs) < budget and len(taken) < n_grid:
        predict = _surrogate(np.array(zs), np.array(vals), lo, hi)
        m, s = predict(grid)
        acq = m - kappa * s
        acq[list(taken)] = np.inf
        i = int(np.argmin(acq))
        taken.add(i)
        zs.append(float(grid[i]))
        vals.append(float(objective(grid[i])))

    predict = _surrogate(np.array(zs), np.array(vals), lo, hi)
    m, s = predict(grid)
    values = np.array(vals)
    return BayesOptReport(
        z=np.array(zs),
        values=values,
        incumbent=np.minimum.accumulate(values),
        grid=grid,
        mean=m,
        lower=m - kappa * s,
        upper=m + kappa * s,
        kappa=kappa,
    )


@dataclass(frozen=True)
class ComplexityRow:
    horizon: int
    seconds: float
    per_iteration: float
    solver_iterations: int


@dataclass
class ComplexityReport:
    rows: list = field(default_factory=list)

    @property
    def slope(self) -> float | None:
        """Least-squares slope of log per-iteration time against log horizon.

        ``None`` with fewer than two horizons.
        """
        if len(self.rows) < 2:
            return None
        h = np.log([r.horizon for r in self.rows])
        y = np.log([r.per_iteration for r in self.rows])
        return float(np.polyfit(h, y, 1)[0])


def complexity_probe(
    scenario_for_horizon: Callable[[int], object],
    horizons: Sequence[int],
    settings: RunSettings | None = None,
    seed: int = 0,
    clock: Callable[[], float] = time.perf_counter,
) -> ComplexityReport:
    """Time full runs of increasing horizon and report the per-iteration cost.

    ``scenario_for_horizon(T)`` builds a scenario whose reference spans ``T``
    steps.
    """
    horizons = [int(h) for h in horizons]
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be increasing")
    settings = settings or RunSettings()
    report = ComplexityReport()
    for T in horizons:
        scenario = scenario_for_horizon(T)
        start = clock()
        trace = run(scenario, replace(settings, horizon=T), seed)
        elapsed = clock() - start
        iters = int(sum(r.solver_iterations for r in trace.rows))
        report.rows.append(ComplexityRow(T, elapsed, elapsed / T, iters))
    return report
