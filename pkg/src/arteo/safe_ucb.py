"""Safe-UCB baseline.

Two GPs over the full decision space: one for the tracking discrepancy ``f``
and one for the safety slack ``g = limit - output``. Each step minimizes the
lower confidence bound of ``f`` subject to the lower confidence bound of ``g``
being nonnegative. The known structure of the output is not used.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .arteo_core import RunSettings, model_gain, split_seed
from .confidence import ConfidenceParams, beta
from .kernel_gp import GaussianProcessModel, KernelSpec, Observation, gp_condition
from .nlp_solver import DecisionProblem, SolverSettings, SolveStatus, minimize
from .trace import RunTrace, TraceRow

__all__ = ["SafeUcbState", "init_safe_ucb_state", "safe_ucb_step", "safe_ucb_problem", "run_safe_ucb"]

log = logging.getLogger(__name__)


@dataclass
class SafeUcbState:
    t: int
    kernel: KernelSpec
    noise_std: float
    model_f: GaussianProcessModel | None
    model_g: GaussianProcessModel | None
    S_f: list
    S_g: list
    params: ConfidenceParams
    last_decision: np.ndarray
    trace: RunTrace
    rng: np.random.Generator
    solver: SolverSettings


def _f_true(scenario, goal, X):
    return np.abs(goal - scenario.produced(X))


def _g_true(scenario, X):
    return scenario.limit - scenario.produced(X)


def init_safe_ucb_state(scenario, settings: RunSettings | None = None, seed: int = 0) -> SafeUcbState:
    settings = settings or RunSettings()
    streams = split_seed(seed)
    rng = streams["noise"]
    noise_std = max(u.noise_std for u in scenario.unknowns)
    X0 = scenario.seed_decisions()
    goal0 = scenario.goal(1)
    yf = _f_true(scenario, goal0, X0) + noise_std * rng.standard_normal(X0.shape[0])
    yg = _g_true(scenario, X0) + noise_std * rng.standard_normal(X0.shape[0])
    S_f = [Observation.of(x, y) for x, y in zip(X0, yf)]
    S_g = [Observation.of(x, y) for x, y in zip(X0, yg)]
    kernel = scenario.unknowns[0].kernel
    if settings.rkhs_bound is not None:
        B = settings.rkhs_bound
    else:
        B = 10.0 * max(np.max(np.abs(yf)), np.max(np.abs(yg))) / np.sqrt(kernel.signal_variance)
    R = noise_std if settings.noise_scale is None else settings.noise_scale
    return SafeUcbState(
        t=0,
        kernel=kernel,
        noise_std=noise_std,
        model_f=None,
        model_g=None,
        S_f=S_f,
        S_g=S_g,
        params=ConfidenceParams(max(B, 1e-6), R, settings.failure_prob, 0.0, settings.beta_override),
        last_decision=X0[0].copy(),
        trace=RunTrace("safe_ucb", seed),
        rng=rng,
        solver=replace(settings.solver, seed=streams["solver_seed"]),
    )


def safe_ucb_problem(bounds, model_f, model_g, beta_t) -> DecisionProblem:
    def objective(P):
        mu, sd = model_f.predict(P)
        return mu - beta_t * sd

    def constraint(P):
        mu, sd = model_g.predict(P)
        return -(mu - beta_t * sd)

    return DecisionProblem(bounds, objective, [constraint], vectorized=True)


def safe_ucb_step(state: SafeUcbState, goal, scenario):
    t = state.t + 1
    dim = scenario.bounds.shape[0]
    noise_var = state.noise_std**2
    model_f = gp_condition(state.kernel, noise_var, state.S_f, dim)
    model_g = gp_condition(state.kernel, noise_var, state.S_g, dim)
    gamma = max(model_gain(model_f), model_gain(model_g))
    params = state.params.with_gamma(gamma)
    beta_t = beta(params)

    problem = safe_ucb_problem(scenario.bounds, model_f, model_g, beta_t)
    result = minimize(problem, state.last_decision, state.solver)
    hold = result.status is SolveStatus.INFEASIBLE
    X = state.last_decision.copy() if hold else result.point
    if hold:
        log.info("safe-ucb step %d: no feasible decision, holding previous", t)

    P = X.reshape(1, -1)
    mf, sf = model_f.predict(P)
    mg, sg = model_g.predict(P)
    yf = float(_f_true(scenario, goal, P)[0] + state.noise_std * state.rng.standard_normal())
    yg = float(_g_true(scenario, P)[0] + state.noise_std * state.rng.standard_normal())
    state.S_f.append(Observation.of(X, yf))
    state.S_g.append(Observation.of(X, yg))

    state.trace.append(
        TraceRow(
            t=t,
            goal=float(goal),
            decision=tuple(float(v) for v in X),
            pred_mean=(float(mf[0]), float(mg[0])),
            pred_std=(float(sf[0]), float(sg[0])),
            true_value=tuple(float(v) for v in scenario.true_values(P)[0]),
            observed=(yf, yg),
            z=0.0,
            beta=float(beta_t),
            gamma=float(gamma),
            margin=float(problem.constraints[0](P)[0]),
            status="safety_hold" if hold else result.status.value,
            safety_hold=hold,
            produced=float(scenario.produced(P)[0]),
            regret=scenario.regret(goal, P),
            uncertainty=float(sf[0] + sg[0]),
            solver_iterations=int(result.iterations),
        )
    )
    state.t = t
    state.model_f, state.model_g = model_f, model_g
    state.params = params
    state.last_decision = np.array(X, dtype=float)
    return X, state


def run_safe_ucb(scenario, settings: RunSettings | None = None, seed: int = 0) -> RunTrace:
    settings = settings or RunSettings()
    horizon = scenario.horizon if settings.horizon is None else settings.horizon
    state = init_safe_ucb_state(scenario, settings, seed)
    for t in range(1, horizon + 1):
        try:
            safe_ucb_step(state, scenario.goal(t), scenario)
        except Exception as exc:
            log.warning("safe-ucb run seed=%d aborted at step %d: %s", seed, t, exc)
            state.trace.partial = True
            state.trace.error = f"step {t}: {exc}"
            break
    state.trace.safe_sets = [state.S_f, state.S_g]
    return state.trace
