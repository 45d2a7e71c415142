import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arteo.arteo_core import RunSettings, run, uncertainty_term
from arteo.kernel_gp import KernelSpec, gp_condition
from arteo.metrics_hyperopt import (
    ComplexityReport,
    ComplexityRow,
    bayesopt_z,
    complexity_probe,
    cumulative_regret,
    decision_changes,
    grid_search_z,
    total_uncertainty,
    violation_count,
)
from arteo.scenarios.toy import make_toy_scenario
from arteo.trace import RunTrace, TraceRow
from oracles import fold_cumsum


def _trace(regrets=(), produced=(), decisions=None):
    n = max(len(regrets), len(produced))
    regrets = list(regrets) or [0.0] * n
    produced = list(produced) or [0.0] * n
    decisions = decisions if decisions is not None else [(0.0,)] * n
    tr = RunTrace("arteo", 0)
    for t, (r, p, x) in enumerate(zip(regrets, produced, decisions), start=1):
        tr.append(TraceRow(t, 0.0, tuple(x), (0.0,), (1.0,), (0.0,), (0.0,), 0.0, 1.0, 0.0, 0.0,
                           "converged", False, p, r, 1.0))
    return tr


def test_cumulative_regret_examples():
    assert list(cumulative_regret(_trace([1, 2, 3]))) == [1, 3, 6]
    assert list(cumulative_regret(_trace([0, 0, 0]))) == [0, 0, 0]
    with pytest.raises(ValueError):
        cumulative_regret(RunTrace("arteo", 0))


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=50))
def test_cumulative_regret_matches_fold(r):
    c = cumulative_regret(_trace(r))
    np.testing.assert_allclose(c, fold_cumsum(r), rtol=1e-12, atol=1e-9)
    assert np.all(np.diff(c) >= 0)
    assert c[-1] == pytest.approx(sum(r), rel=1e-12, abs=1e-9)


def test_violation_count_examples():
    assert violation_count(_trace(produced=[100, 225.6, 200]), 225.6) == 0
    assert violation_count(_trace(produced=[100, 226, 200]), 225.6) == 1
    assert violation_count(_trace(produced=[230, 225.6 + 1e-10, 225.6 + 1e-8, 10, 300]), 225.6) == 3


def test_decision_changes():
    xs = [(0.0, 0.0), (0.05, 0.0), (1.0, 0.0), (1.0, 0.2), (1.0, 0.2)]
    assert decision_changes(_trace(produced=[0] * 5, decisions=xs)) == 2


def test_prior_uncertainty_is_two():
    k = KernelSpec("se", 1.0, 1.0)
    models = [gp_condition(k, 0.01, [], input_dim=1) for _ in range(2)]
    assert uncertainty_term(models, [0.3, -1.2]) == pytest.approx(2.0)


def test_total_uncertainty_matches_recomputation():
    sc = make_toy_scenario(steps=6)
    trace = run(sc, RunSettings(), seed=2)
    (u,) = sc.unknowns
    n0 = len(u.seed_inputs)
    S = trace.safe_sets[0]
    recomputed = []
    for i, r in enumerate(trace.rows):
        model = gp_condition(u.kernel, u.noise_variance, S[: n0 + i], u.input_dim)
        recomputed.append(uncertainty_term([model], r.decision))
    np.testing.assert_allclose(total_uncertainty(trace), recomputed, rtol=1e-10)


def test_grid_single_candidate_and_determinism():
    sc = make_toy_scenario(steps=4)
    best, table, unique = grid_search_z([7.0], sc, seeds=(0, 1))
    assert best == 7.0 and unique and len(table) == 1
    a = grid_search_z([0.0, 5.0], sc, seeds=(0, 1))
    b = grid_search_z([0.0, 5.0], sc, seeds=(0, 1))
    assert a == b
    assert all(r.seeds == (0, 1) for r in a[1])


def test_grid_ties_go_to_smaller_z(monkeypatch):
    import arteo.metrics_hyperopt as mh

    monkeypatch.setattr(mh, "_mean_regret", lambda sc, s, z, seeds: (1.0,) * len(seeds))
    best, table, unique = mh.grid_search_z([50.0, 5.0, 25.0], None)
    assert best == 5.0 and not unique
    assert [r.z for r in table] == [50.0, 5.0, 25.0]


def test_bayesopt_convex_and_deterministic():
    rep = bayesopt_z((1.0, 100.0), 35, objective=lambda z: (z - 28.0) ** 2, seed=3)
    assert len(rep.z) == 35
    assert abs(rep.best_z - 28.0) <= 0.2 * 28.0
    assert np.all(np.diff(rep.incumbent) <= 0)
    assert rep.incumbent[-1] <= rep.values[:3].min()
    again = bayesopt_z((1.0, 100.0), 35, objective=lambda z: (z - 28.0) ** 2, seed=3)
    np.testing.assert_array_equal(rep.z, again.z)
    assert rep.grid.size == 512


def test_bayesopt_budget_capped_and_validated():
    rep = bayesopt_z((0.0, 1.0), 100, objective=lambda z: z)
    assert len(rep.z) == 35
    with pytest.raises(ValueError):
        bayesopt_z((1.0, 1.0), 10, objective=lambda z: z)
    with pytest.raises(ValueError):
        bayesopt_z((0.0, 1.0), 2, objective=lambda z: z)


def test_complexity_single_horizon_undefined():
    ticks = iter(np.arange(0.0, 100.0, 1.0))
    sc_for = lambda T: make_toy_scenario(steps=T)  # noqa: E731
    rep = complexity_probe(sc_for, [3], clock=lambda: next(ticks))
    assert rep.slope is None
    assert rep.rows[0].per_iteration == pytest.approx(1.0 / 3)


def test_complexity_slope_and_iteration_counts():
    rows = [ComplexityRow(h, h**2 * 1e-3, h * 1e-3, 0) for h in (50, 100, 200)]
    assert ComplexityReport(rows).slope == pytest.approx(1.0)
    sc_for = lambda T: make_toy_scenario(steps=T)  # noqa: E731
    a = complexity_probe(sc_for, [3, 5])
    b = complexity_probe(sc_for, [3, 5])
    assert [r.solver_iterations for r in a.rows] == [r.solver_iterations for r in b.rows]
    with pytest.raises(ValueError):
        complexity_probe(sc_for, [5, 3])
