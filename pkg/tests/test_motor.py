import numpy as np
import pytest

from arteo.kernel_gp import KernelSpec, Observation, gp_condition
from arteo.scenarios.base import ReferenceSignal, ScenarioError, reference_signal
from arteo.scenarios.motor import (
    DEFAULT_REFERENCE,
    MACHINE_1,
    MACHINE_2,
    SAFETY_LIMIT,
    MotorParams,
    make_motor_scenario,
    motor_objective,
    motor_safety,
    regret,
    true_current,
)


class _Fixed:
    """Model stub with a constant mean and std, enough for the arithmetic examples."""

    def __init__(self, mean, std):
        self.mean, self.std = mean, std

    def predict(self, X):
        n = np.atleast_2d(X).shape[0]
        return np.full(n, self.mean), np.full(n, self.std)


def test_true_current_examples():
    assert true_current(MACHINE_1, 0.0) == 0.0
    assert true_current(MACHINE_1, 16.5) == pytest.approx(100.0)
    assert true_current(MACHINE_2, 38.0) == pytest.approx(230.30303, abs=1e-4)


def test_true_current_bounds():
    with pytest.raises(ScenarioError):
        true_current(MACHINE_1, 38.5)
    with pytest.raises(ScenarioError):
        true_current(MACHINE_1, -0.1)


def test_true_current_strictly_increasing():
    T = np.linspace(0, 38, 500)
    for machine in (MACHINE_1, MACHINE_2):
        assert np.all(np.diff(true_current(machine, T)) > 0)


def test_motor_params_positive():
    with pytest.raises(ValueError):
        MotorParams(0.0, 1e-5, 0.165, 0.025)


def test_objective_examples():
    k = KernelSpec("se", 215.0, 250.0**2)
    data = [Observation.of(t, t / 0.165) for t in (0.0, 5.0, 10.0, 20.0, 30.0)]
    exact = [gp_condition(k, 0.0, data) for _ in range(2)]
    X = np.array([10.0, 20.0])
    Cr = (10.0 + 20.0) / 0.165
    # jitter keeps noiseless interpolation approximate
    assert motor_objective(X, exact, Cr, 0.0) == pytest.approx(0.0, abs=1e-2)
    models = [_Fixed(120.0, 1.0), _Fixed(80.0, 1.0)]
    assert motor_objective(X, models, 210.0, 0.0) == pytest.approx(100.0)
    assert motor_objective(X, models, 210.0, 25.0) == pytest.approx(50.0)


def test_safety_examples():
    X = np.array([1.0, 1.0])
    assert motor_safety(X, [_Fixed(112.8, 0.0), _Fixed(112.8, 0.0)], 0.0) == pytest.approx(0.0, abs=1e-12)
    assert motor_safety(X, [_Fixed(100.0, 5.0), _Fixed(100.0, 5.0)], 2.0) == pytest.approx(-5.6)
    assert motor_safety(X, [_Fixed(110.0, 2.5), _Fixed(110.0, 2.5)], 2.0) == pytest.approx(4.4)


def test_regret_examples():
    assert regret(100.0, 95.0) == 5.0
    assert regret(100.0, 100.0) == 0.0
    assert regret(240.0, 225.0) == pytest.approx(0.6)


def test_reference_signal_lookup():
    assert reference_signal(ReferenceSignal(((10, 150.0),)), 3) == 150.0
    sig = ReferenceSignal(((5, 100.0), (5, 240.0)))
    assert reference_signal(sig, 7) == 240.0
    with pytest.raises(IndexError):
        reference_signal(sig, 11)


def test_default_reference_has_unreachable_level():
    assert max(v for _, v in DEFAULT_REFERENCE.segments) > SAFETY_LIMIT
    assert DEFAULT_REFERENCE.horizon == 40


def test_reference_csv_round_trip():
    text = DEFAULT_REFERENCE.to_csv()
    assert ReferenceSignal.from_csv(text) == DEFAULT_REFERENCE
    with pytest.raises(ScenarioError) as err:
        ReferenceSignal.from_csv("duration,level\n4,60\n3,abc\n")
    assert "line 3" in str(err.value)


def test_reference_rejects_negative_levels():
    with pytest.raises(ValueError):
        ReferenceSignal(((3, -1.0),))


def test_seed_points_are_safe():
    sc = make_motor_scenario()
    for u in sc.unknowns:
        for s in u.seed_inputs:
            X = np.zeros(2)
            X[list(u.columns)] = s
            assert sc.produced(X)[0] < SAFETY_LIMIT


def test_unsafe_seed_rejected():
    from arteo.scenarios.motor import MotorScenarioConfig

    with pytest.raises(ScenarioError):
        make_motor_scenario(MotorScenarioConfig(seed_torques=(2.0, 38.0)))


def test_unreachable_steps_stay_below_limit(motor_arteo_runs):
    limit = SAFETY_LIMIT
    ok = 0
    for trace in motor_arteo_runs:
        rows = [r for r in trace.rows if r.goal > limit]
        ok += all(r.produced <= limit + 1e-6 for r in rows)
    assert ok >= 0.95 * len(motor_arteo_runs)



def test_second_step_estimate_close(motor_arteo_runs):
    # after the seed and one observation, the predicted total is within 5 A of the goal
    close = 0
    for trace in motor_arteo_runs:
        r = trace.rows[1]
        close += abs(sum(r.pred_mean) - r.goal) <= 5.0
    assert close >= 0.9 * len(motor_arteo_runs)
