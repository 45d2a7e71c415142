"""The ARTEO loop.

Every trigger re-conditions one GP per unknown on its safe set, picks the
exploration weight, solves the constrained decision problem whose cost is the
decision cost minus ``z`` times the summed posterior std, and appends the
noisy observation at the chosen decision to each safe set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .confidence import ConfidenceParams, beta, information_gain, propagate_bounds_multi
from .kernel_gp import GaussianProcessModel, Observation, gp_condition
from .nlp_solver import DecisionProblem, SolverSettings, SolveStatus, minimize
from .trace import RunTrace, TraceRow

__all__ = [
    "ExplorationPolicy",
    "RunSettings",
    "RunState",
    "uncertainty_term",
    "arteo_cost",
    "arteo_step",
    "build_problem",
    "init_state",
    "run",
    "split_seed",
    "default_confidence",
]

log = logging.getLogger(__name__)


@dataclass
class ExplorationPolicy:
    zeta: float
    rule: Callable = lambda state, goal: False

    def weight(self, state, goal) -> float:
        return self.zeta if self.rule(state, goal) else 0.0


@dataclass
class RunSettings:
    """Knobs for one run. ``None`` confidence fields fall back to scenario defaults."""

    horizon: int | None = None
    rkhs_bound: float | None = None
    noise_scale: float | None = None
    failure_prob: float = 0.05
    beta_override: float | None = None
    zeta: float | None = None
    explore: str = "rule"  # "rule", "never" or "always"
    solver: SolverSettings = field(default_factory=SolverSettings)


@dataclass
class RunState:
    t: int
    models: list
    params: ConfidenceParams
    last_decision: np.ndarray
    safe_sets: list
    trace: RunTrace
    rng: np.random.Generator
    policy: ExplorationPolicy
    solver: SolverSettings

    @property
    def rows(self):
        return self.trace.rows


def split_seed(seed: int) -> dict:
    """Expand a root seed into independent per-component streams.

    The root ``SeedSequence(seed)`` is spawned into three children in a fixed
    order: observation noise, solver multi-start, data generation.
    """
    noise, solver, gen = np.random.SeedSequence(seed).spawn(3)
    return {
        "noise": np.random.default_rng(noise),
        "solver_seed": int(solver.generate_state(1)[0]),
        "generator": np.random.default_rng(gen),
    }


def _predict_columns(models, columns, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mus, sds = [], []
    for m, cols in zip(models, columns):
        mu, sd = m.predict(X[:, list(cols)])
        mus.append(mu)
        sds.append(sd)
    return np.column_stack(mus), np.column_stack(sds)


def uncertainty_term(models, X, columns=None) -> float:
    """Sum of posterior stds of all unknowns at decision ``X``.

    Model ``i`` reads decision component ``i`` unless ``columns`` says otherwise.
    """
    X = np.asarray(X, dtype=float).reshape(1, -1)
    columns = columns or [(i,) for i in range(len(models))]
    _, sd = _predict_columns(models, columns, X)
    return float(sd.sum())


def arteo_cost(cost_value, uncertainty, z):
    return cost_value - z * uncertainty


class _CachedPredictor:
    """Memoizes the last batch so objective and constraints share one prediction."""

    def __init__(self, models, columns):
        self.models = models
        self.columns = columns
        self._key = None
        self._val = None

    def __call__(self, P):
        key = P.tobytes()
        if key != self._key:
            self._val = _predict_columns(self.models, self.columns, P)
            self._key = key
        return self._val


def build_problem(scenario, models, goal, z, beta_t) -> DecisionProblem:
    """Decision problem with cost ``C - z*U`` and propagated safety bounds."""
    columns = [u.columns for u in scenario.unknowns]
    pred = _CachedPredictor(models, columns)

    def objective(P):
        mu, sd = pred(P)
        return arteo_cost(scenario.cost(P, mu, goal), sd.sum(axis=1), z)

    def make_constraint(sc):
        def constraint(P):
            mu, sd = pred(P)
            lo, hi = propagate_bounds_multi(
                sc.g_form, scenario.known_terms(P), mu - beta_t * sd, mu + beta_t * sd, sc.monotonicity
            )
            return hi - sc.threshold if sc.sense == "le" else sc.threshold - lo

        return constraint

    return DecisionProblem(
        bounds=scenario.bounds,
        objective=objective,
        constraints=[make_constraint(sc) for sc in scenario.safety],
        vectorized=True,
        known_terms=scenario.known_terms,
    )


def model_gain(model: GaussianProcessModel) -> float:
    noise = model.noise_variance if model.noise_variance > 0 else max(model.jitter, 1e-12)
    return information_gain(model.gram(), noise)


def default_confidence(scenario, safe_sets, settings: RunSettings) -> ConfidenceParams:
    """B defaults to ten times the largest seed value in prior-std units; R to the noise std."""
    if settings.rkhs_bound is not None:
        B = settings.rkhs_bound
    else:
        B = max(
            10.0 * max(abs(o.value) for o in S) / np.sqrt(u.kernel.signal_variance)
            for u, S in zip(scenario.unknowns, safe_sets)
        )
        B = max(B, 1e-6)
    R = settings.noise_scale
    if R is None:
        R = max(u.noise_std for u in scenario.unknowns)
    return ConfidenceParams(B, R, settings.failure_prob, 0.0, settings.beta_override)


def init_state(scenario, settings: RunSettings | None = None, seed: int = 0) -> RunState:
    settings = settings or RunSettings()
    streams = split_seed(seed)
    rng = streams["noise"]
    safe_sets = scenario.seed_observations(rng)
    if any(len(S) == 0 for S in safe_sets):
        raise ValueError("every unknown needs a nonempty safe seed set")
    zeta = scenario.zeta if settings.zeta is None else settings.zeta
    rule = {
        "rule": scenario.exploration_rule,
        "never": lambda state, goal: False,
        "always": lambda state, goal: True,
    }[settings.explore]
    return RunState(
        t=0,
        models=[],
        params=default_confidence(scenario, safe_sets, settings),
        last_decision=scenario.initial_decision(),
        safe_sets=safe_sets,
        trace=RunTrace("arteo", seed),
        rng=rng,
        policy=ExplorationPolicy(zeta, rule),
        solver=replace(settings.solver, seed=streams["solver_seed"]),
    )


def arteo_step(state: RunState, goal, scenario):
    """One trigger of the loop; mutates and returns ``state``.

    If the solver finds no feasible decision the previous decision is held
    and the row is flagged as a safety hold.
    """
    t = state.t + 1
    z = state.policy.weight(state, goal)
    models = [
        gp_condition(u.kernel, u.noise_variance, S, u.input_dim)
        for u, S in zip(scenario.unknowns, state.safe_sets)
    ]
    gamma = max(model_gain(m) for m in models)
    params = state.params.with_gamma(gamma)
    beta_t = beta(params)

    problem = build_problem(scenario, models, goal, z, beta_t)
    result = minimize(problem, state.last_decision, state.solver)
    hold = result.status is SolveStatus.INFEASIBLE
    if hold:
        log.info("step %d: no feasible decision, holding previous (%s)", t, result.message)
        X = state.last_decision.copy()
    else:
        X = result.point

    columns = [u.columns for u in scenario.unknowns]
    mu, sd = _predict_columns(models, columns, X)
    margin = max(float(c(X.reshape(1, -1))[0]) for c in problem.constraints) if problem.constraints else 0.0
    y = scenario.observe(X, state.rng)
    for u, S, yi in zip(scenario.unknowns, state.safe_sets, y):
        S.append(Observation.of(X[list(u.columns)], yi))

    state.trace.append(
        TraceRow(
            t=t,
            goal=float(goal),
            decision=tuple(float(v) for v in X),
            pred_mean=tuple(float(v) for v in mu[0]),
            pred_std=tuple(float(v) for v in sd[0]),
            true_value=tuple(float(v) for v in scenario.true_values(X)[0]),
            observed=tuple(float(v) for v in y),
            z=float(z),
            beta=float(beta_t),
            gamma=float(gamma),
            margin=margin,
            status="safety_hold" if hold else result.status.value,
            safety_hold=hold,
            produced=float(scenario.produced(X)[0]),
            regret=scenario.regret(goal, X),
            uncertainty=float(sd.sum()),
            solver_iterations=int(result.iterations),
        )
    )
    state.t = t
    state.models = models
    state.params = params
    state.last_decision = np.array(X, dtype=float)
    return X, state


def run(scenario, settings: RunSettings | None = None, seed: int = 0) -> RunTrace:
    settings = settings or RunSettings()
    horizon = scenario.horizon if settings.horizon is None else settings.horizon
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    state = init_state(scenario, settings, seed)
    for t in range(1, horizon + 1):
        try:
            arteo_step(state, scenario.goal(t), scenario)
        except Exception as exc:  # partial traces are reported, not raised
            log.warning("arteo run seed=%d aborted at step %d: %s", seed, t, exc)
            state.trace.partial = True
            state.trace.error = f"step {t}: {exc}"
            break
    state.trace.safe_sets = state.safe_sets
    return state.trace
