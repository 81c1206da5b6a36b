import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bvaukf.errors import DegeneratePose
from bvaukf.seqmodel import SeqModel, predict
from bvaukf.uq import (
    VAR_FLOOR,
    PredictiveDistribution,
    distribution_from_samples,
    mc_dropout_predict,
    moments,
    pass_seeds,
    surrogate_measurement,
)


def test_pass_seeds_stable_and_distinct():
    a = pass_seeds(5, 10)
    assert a == pass_seeds(5, 10)
    assert len(set(a)) == 10
    assert pass_seeds(5, 3) == a[:3]


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 4), st.integers(1, 3)),
              elements=st.floats(-1e3, 1e3)))
def test_moments_match_numpy(samples):
    mean, var = moments(samples)
    np.testing.assert_allclose(mean, samples.mean(axis=0), atol=1e-9)
    np.testing.assert_allclose(var, samples.var(axis=0), atol=1e-6)
    assert np.all(var >= 0)


def test_identical_samples_have_zero_variance():
    y = np.random.default_rng(0).normal(size=(3, 4))
    mean, var = moments(np.repeat(y[None], 10, axis=0))
    assert np.all(var == 0.0)
    np.testing.assert_array_equal(mean, y)


def test_predictor_callable_is_used():
    calls = []

    def predictor(observed, seed):
        calls.append(seed)
        return np.full((4, 2), float(len(calls)))

    dist = mc_dropout_predict(None, np.zeros((3, 2)), K=4, seed=9, predictor=predictor)
    assert calls == pass_seeds(9, 4)
    np.testing.assert_allclose(dist.mean, 2.5)
    np.testing.assert_allclose(dist.variance, 1.25)
    assert dist.K == 4 and dist.d == 2 and dist.horizon == 4


def test_model_passes_match_single_predictions():
    model = SeqModel.initialize(4, 5, 6, 0.3, "force", seed=2)
    obs = np.random.default_rng(1).normal(size=(9, 4))
    dist = mc_dropout_predict(model, obs, K=5, seed=3)
    for s, sample in zip(pass_seeds(3, 5), dist.samples):
        np.testing.assert_allclose(sample, predict(model, obs, s), atol=1e-13)


def test_no_dropout_zero_variance():
    model = SeqModel.initialize(6, 5, 6, 0.0, "pose", seed=2)
    obs = np.tile([0.6, 0.0, -0.8, 0.0, 0.6, -0.8], (9, 1))
    assert np.all(mc_dropout_predict(model, obs, K=10, seed=0).variance == 0.0)


def test_k_must_be_at_least_two():
    with pytest.raises(ValueError):
        mc_dropout_predict(None, np.zeros((3, 2)), K=1, predictor=lambda o, s: o)


def test_surrogate_measurement():
    mean = np.array([[2.0, 0, 0, 0, 0, -3.0]])
    var = np.array([[1e-3, 0, 2e-9, 1.0, 1.0, 1.0]])
    y, r = surrogate_measurement(PredictiveDistribution(mean, var, 10), np.full(6, 2.0))
    np.testing.assert_array_equal(y, [[1, 0, 0, 0, 0, -1]])
    np.testing.assert_allclose(r, [[2e-3, VAR_FLOOR, VAR_FLOOR, 2, 2, 2]])


def test_surrogate_measurement_degenerate():
    mean = np.zeros((1, 6))
    mean[0, 2] = 1.0
    with pytest.raises(DegeneratePose):
        surrogate_measurement(PredictiveDistribution(mean, np.ones((1, 6)), 2))


def test_distribution_from_samples_keeps_samples():
    s = np.arange(12.0).reshape(3, 2, 2)
    d = distribution_from_samples(s)
    assert d.samples is not None and d.K == 3
