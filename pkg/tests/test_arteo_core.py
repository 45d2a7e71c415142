import numpy as np
import pytest

from arteo.arteo_core import (
    RunSettings,
    arteo_cost,
    arteo_step,
    build_problem,
    init_state,
    run,
    split_seed,
    uncertainty_term,
)
from arteo.kernel_gp import KernelSpec, Observation, gp_condition, gp_predict
from arteo.nlp_solver import grid_oracle
from arteo.scenarios.toy import make_toy_scenario


def test_uncertainty_of_priors():
    models = [gp_condition(KernelSpec("se", 1.0, 1.0), 0.1, [], 1) for _ in range(2)]
    assert uncertainty_term(models, [0.3, 4.0]) == pytest.approx(2.0)


def test_uncertainty_at_noiseless_datum():
    k = KernelSpec("se", 1.0, 1.0)
    models = [gp_condition(k, 0.0, [Observation.of(1.0, 3.0)]), gp_condition(k, 0.0, [Observation.of(2.0, -1.0)])]
    assert uncertainty_term(models, [1.0, 2.0]) < 1e-3


def test_uncertainty_is_sum_of_component_stds(rng):
    k = KernelSpec("matern32", 2.0, 1.0)
    models = [
        gp_condition(k, 0.1, [Observation.of(x, v) for x, v in zip(rng.uniform(0, 5, 4), rng.normal(size=4))])
        for _ in range(2)
    ]
    X = rng.uniform(0, 5, 2)
    ref = gp_predict(models[0], X[0])[1] + gp_predict(models[1], X[1])[1]
    assert uncertainty_term(models, X) == pytest.approx(ref, abs=1e-12)


def test_arteo_cost():
    assert arteo_cost(3.0, 2.0, 0.0) == 3.0
    assert arteo_cost(10.0, 2.0, 25.0) == -40.0
    values = [arteo_cost(5.0, 1.5, z) for z in (0.0, 1.0, 10.0, 100.0)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_split_seed_streams_are_stable():
    a, b = split_seed(3), split_seed(3)
    assert a["solver_seed"] == b["solver_seed"]
    assert a["noise"].standard_normal() == b["noise"].standard_normal()
    assert split_seed(4)["solver_seed"] != a["solver_seed"]


def test_single_step_run_uses_seed_only():
    sc = make_toy_scenario()
    trace = run(sc, RunSettings(horizon=1), seed=0)
    assert len(trace) == 1
    assert len(trace.safe_sets[0]) == 3
    assert trace.rows[0].gamma > 0


def test_never_explore_gives_zero_weights():
    sc = make_toy_scenario(zeta=50.0)
    trace = run(sc, RunSettings(explore="never"), seed=1)
    assert np.all(trace.column("z") == 0.0)


def test_weights_are_zero_or_zeta():
    sc = make_toy_scenario(zeta=7.0, steps=15)
    trace = run(sc, RunSettings(), seed=2)
    assert set(np.unique(trace.column("z"))) <= {0.0, 7.0}


def test_safe_set_growth():
    sc = make_toy_scenario(steps=12)
    trace = run(sc, RunSettings(), seed=0)
    assert all(len(S) == len(u.seed_inputs) + 12 for u, S in zip(sc.unknowns, trace.safe_sets))


def test_decisions_satisfy_surrogate_constraint():
    sc = make_toy_scenario(goal=30.0, limit=25.0, steps=15)
    trace = run(sc, RunSettings(), seed=0)
    for r in trace.rows:
        if not r.safety_hold:
            assert r.margin <= 1e-6


def test_zero_zeta_converges_on_toy():
    sc = make_toy_scenario(goal=15.0, zeta=0.0, steps=20)
    X = run(sc, RunSettings(), seed=0).decisions[:, 0]
    assert np.max(np.abs(np.diff(X[9:]))) < 1e-3


def test_toy_step_matches_grid_oracle():
    sc = make_toy_scenario()
    state = init_state(sc, RunSettings(), seed=0)
    x, state = arteo_step(state, sc.goal(1), sc)
    models = state.models
    from arteo.confidence import beta

    p = build_problem(sc, models, sc.goal(1), 0.0, beta(state.params))
    ref = grid_oracle(p, 1e-4)
    assert abs(x[0] - ref.point[0]) <= 1e-3
    f = p.objective_batch(x.reshape(1, -1))[0]
    assert f <= ref.value + 1e-6


def test_models_conditioned_on_previous_safe_set():
    sc = make_toy_scenario()
    state = init_state(sc, RunSettings(), seed=0)
    arteo_step(state, sc.goal(1), sc)
    arteo_step(state, sc.goal(2), sc)
    # the models of step 2 saw the seeds and the step-1 observation
    assert state.models[0].n_obs == len(sc.unknowns[0].seed_inputs) + 1


def test_infeasible_step_holds_previous_decision():
    # a limit below every achievable output makes every decision infeasible
    sc = make_toy_scenario(limit=25.0)
    sc.limit = -100.0
    sc.safety[0].threshold = -100.0
    trace = run(sc, RunSettings(horizon=3), seed=0)
    assert all(r.safety_hold for r in trace.rows)
    assert all(r.status == "safety_hold" for r in trace.rows)
    assert np.all(trace.decisions == sc.initial_decision())


def test_failures_produce_partial_trace():
    sc = make_toy_scenario(steps=5)
    calls = {"n": 0}
    truth = sc.unknowns[0].truth

    def flaky(X):
        calls["n"] += 1
        if calls["n"] > 9:
            raise RuntimeError("sensor offline")
        return truth(X)

    sc.unknowns[0].truth = flaky
    trace = run(sc, RunSettings(), seed=0)
    assert trace.partial
    assert "sensor offline" in trace.error
    assert 0 < len(trace) < 5


def test_run_is_deterministic():
    sc = make_toy_scenario(zeta=3.0, steps=10)
    a = run(sc, RunSettings(), seed=5)
    b = run(sc, RunSettings(), seed=5)
    assert a.rows == b.rows


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        run(make_toy_scenario(), RunSettings(horizon=0))
