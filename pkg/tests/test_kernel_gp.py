import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from arteo.kernel_gp import (
    DimensionError,
    KernelSpec,
    NumericalError,
    Observation,
    cholesky_with_jitter,
    gp_condition,
    gp_predict,
    gp_sample_prior,
    kernel_eval,
)
from oracles import dense_gp, kernel_value

FAMILIES = ["se", "matern32"]


def _data(X, y):
    return [Observation.of(x, v) for x, v in zip(X, y)]


# -- kernels -----------------------------------------------------------------


@pytest.mark.parametrize("family", FAMILIES)
def test_zero_distance_gives_signal_variance(family):
    k = KernelSpec(family, 3.0, 2.5)
    assert kernel_eval(k, [0.3, -1.0], [0.3, -1.0]) == pytest.approx(2.5)


def test_se_at_one_length_scale():
    assert kernel_eval(KernelSpec("se", 215.0, 1.0), 10.0, 225.0) == pytest.approx(0.60653066, abs=1e-8)


def test_matern_at_one_length_scale():
    assert kernel_eval(KernelSpec("matern32", 1.0, 1.0), 0.0, 1.0) == pytest.approx(0.48335772, abs=1e-8)


def test_kernel_dimension_mismatch_names_both():
    with pytest.raises(DimensionError) as err:
        kernel_eval(KernelSpec(), [1.0, 2.0], [1.0, 2.0, 3.0])
    assert "2" in str(err.value) and "3" in str(err.value)


@pytest.mark.parametrize("family", FAMILIES)
def test_matrix_matches_pointwise_oracle(family, rng):
    k = KernelSpec(family, 0.7, 1.3)
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    ref = np.array([[kernel_value(family, 0.7, 1.3, a, b) for b in B] for a in A])
    np.testing.assert_allclose(k.matrix(A, B), ref, rtol=1e-12, atol=1e-14)


def test_invalid_kernel_parameters():
    with pytest.raises(ValueError):
        KernelSpec("se", 0.0, 1.0)
    with pytest.raises(ValueError):
        KernelSpec("rbf", 1.0, 1.0)


points = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 3)),
                elements=st.floats(-10, 10, allow_nan=False))


@given(points, st.sampled_from(FAMILIES), st.floats(0.1, 5.0))
def test_gram_symmetric_psd(P, family, ell):
    K = KernelSpec(family, ell, 1.0).matrix(P)
    np.testing.assert_allclose(K, K.T, atol=1e-14)
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_gram_psd_on_100_random_sets(rng):
    for i in range(100):
        P = rng.uniform(-5, 5, size=(int(rng.integers(2, 15)), int(rng.integers(1, 4))))
        K = KernelSpec(FAMILIES[i % 2], float(rng.uniform(0.2, 3)), 1.0).matrix(P)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


# -- conditioning and prediction ---------------------------------------------


def test_prior_prediction():
    m = gp_condition(KernelSpec("se", 1.0, 1.0), 0.01, [], input_dim=2)
    assert gp_predict(m, [0.4, 9.0]) == (0.0, 1.0)


def test_noiseless_interpolation():
    m = gp_condition(KernelSpec("se", 1.0, 1.0), 0.0, [Observation.of(0.5, 2.0)])
    mean, _ = gp_predict(m, 0.5)
    assert mean == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_three_points_against_dense_solve(family):
    X = [[0.0], [1.0], [2.5]]
    y = [1.0, -0.5, 0.3]
    m = gp_condition(KernelSpec(family, 1.2, 2.0), 0.1, _data(X, y))
    Xq = [[0.3], [1.7], [4.0]]
    ref_mean, ref_var = dense_gp(family, 1.2, 2.0, 0.1 + m.jitter, X, np.array(y), Xq)
    mean, sd = m.predict(np.array(Xq))
    np.testing.assert_allclose(mean, ref_mean, atol=1e-8)
    np.testing.assert_allclose(sd**2, ref_var, atol=1e-8)


def test_far_query_reverts_to_prior():
    X = np.linspace(0, 1, 5).reshape(-1, 1)
    m = gp_condition(KernelSpec("se", 0.5, 4.0), 0.01, _data(X, np.sin(X[:, 0])))
    _, sd = gp_predict(m, 50.0)
    assert sd == pytest.approx(2.0, abs=1e-3)


def test_prediction_dimension_mismatch():
    m = gp_condition(KernelSpec(), 0.1, [Observation.of([0.0, 1.0], 1.0)])
    with pytest.raises(DimensionError):
        gp_predict(m, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        gp_condition(KernelSpec(), 0.1, [Observation.of([0.0, 1.0], 1.0)], input_dim=3)


def test_deterministic_conditioning(rng):
    X = rng.normal(size=(6, 2))
    data = _data(X, rng.normal(size=6))
    a = gp_condition(KernelSpec(), 0.05, data)
    b = gp_condition(KernelSpec(), 0.05, data)
    q = rng.normal(size=(4, 2))
    assert np.array_equal(a.predict(q)[0], b.predict(q)[0])
    assert np.array_equal(a.predict(q)[1], b.predict(q)[1])


def test_variance_at_datum_below_prior(rng):
    X = rng.normal(size=(5, 1))
    m = gp_condition(KernelSpec("se", 1.0, 1.0), 0.1, _data(X, rng.normal(size=5)))
    _, sd = m.predict(X)
    assert np.all(sd**2 < 1.0)


@given(st.integers(0, 10_000))
def test_order_invariance(seed):
    r = np.random.default_rng(seed)
    X = r.uniform(-3, 3, size=(8, 2))
    y = r.normal(size=8)
    perm = r.permutation(8)
    k = KernelSpec("matern32", 1.0, 1.0)
    a = gp_condition(k, 0.05, _data(X, y))
    b = gp_condition(k, 0.05, _data(X[perm], y[perm]))
    q = r.uniform(-3, 3, size=(5, 2))
    np.testing.assert_allclose(a.predict(q)[0], b.predict(q)[0], atol=1e-8)
    np.testing.assert_allclose(a.predict(q)[1], b.predict(q)[1], atol=1e-8)


@given(st.integers(0, 10_000))
def test_adding_data_never_increases_variance(seed):
    r = np.random.default_rng(seed)
    X = r.uniform(-3, 3, size=(7, 1))
    y = r.normal(size=7)
    q = np.linspace(-4, 4, 25)
    k = KernelSpec("se", 0.8, 1.0)
    prev = gp_condition(k, 0.1, [], input_dim=1).predict(q)[1]
    for n in range(1, 8):
        cur = gp_condition(k, 0.1, _data(X[:n], y[:n])).predict(q)[1]
        assert np.all(cur <= prev + 1e-10)
        assert np.all(cur >= 0)
        prev = cur


def test_near_duplicate_inputs_use_jitter():
    k = KernelSpec("se", 1.0, 1.0)
    data = [Observation.of(1.0, 0.5), Observation.of(1.0, 0.5), Observation.of(1.0 + 1e-12, 0.5)]
    m = gp_condition(k, 0.0, data)
    assert m.jitter > 0
    assert gp_predict(m, 1.0)[0] == pytest.approx(0.5, abs=1e-4)


def test_unfactorizable_gram_raises():
    K = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(NumericalError):
        cholesky_with_jitter(K, 1.0)


# -- prior samples -------------------------------------------------------------


def test_prior_sample_variance():
    k = KernelSpec("se", 1.0, 1.0)
    draws = np.array([gp_sample_prior(k, [[0.3]], s)[0] for s in range(10_000)])
    assert np.var(draws) == pytest.approx(1.0, rel=0.05)


def test_prior_sample_identical_points_and_determinism():
    k = KernelSpec("matern32", 1.0, 1.0)
    v = gp_sample_prior(k, [[1.0], [1.0], [2.0]], 7)
    assert v[0] == v[1]
    assert np.array_equal(v, gp_sample_prior(k, [[1.0], [1.0], [2.0]], 7))


def test_prior_sample_needs_points():
    with pytest.raises(ValueError):
        gp_sample_prior(KernelSpec(), np.zeros((0, 1)), 0)
