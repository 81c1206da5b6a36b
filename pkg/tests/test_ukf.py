import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvaukf.dynamics import euler_step, gravity, simulate
from bvaukf.errors import FilterDiverged, NotPSD, SingularInnovation
from bvaukf.kinematics import angles_to_pose
from bvaukf.ukf import (
    UkfConfig,
    UkfState,
    cholesky_jitter,
    default_rho,
    initial_state,
    measurement_noise,
    predict_step,
    process_noise,
    run_aukf,
    sigma_points,
    unscented_moments,
    update_step,
    ut_weights,
)
from bvaukf.uq import PredictiveDistribution

from .oracles import linear_equivalence


def first_six(X):
    return X[..., :6]


def probe_prior(var=1.0):
    return UkfState(np.zeros(8), var * np.eye(8))


def test_default_rho():
    np.testing.assert_allclose(default_rho(0.04), np.r_[np.full(4, 0.0008**2), np.full(4, 0.0016)])


@pytest.mark.parametrize("alpha, beta, kappa", [(1.0, 2.0, 0.0), (0.5, 2.0, 1.0), (1.0, 0.0, 3.0)])
def test_weights_sum_to_one(alpha, beta, kappa):
    wm, wc = ut_weights(UkfConfig(ut_alpha=alpha, ut_beta=beta, ut_kappa=kappa))
    assert wm.shape == (17,)
    assert wm.sum() == pytest.approx(1.0)
    assert wc[0] == pytest.approx(wm[0] + 1 - alpha**2 + beta)


def test_default_weights_are_uniform():
    wm, wc = ut_weights(UkfConfig())
    np.testing.assert_allclose(wm, np.r_[0.0, np.full(16, 1 / 16)])
    assert wc[0] == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.2, 1.0))
def test_sigma_points_reproduce_moments(seed, alpha):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(8, 8))
    P = A @ A.T + 0.1 * np.eye(8)
    x = rng.normal(size=8)
    cfg = UkfConfig(ut_alpha=alpha)
    pts, wm, wc = sigma_points(x, P, cfg)
    mean, cov = unscented_moments(pts, wm, wc)
    np.testing.assert_allclose(mean, x, atol=1e-10)
    # the beta term only weights the centre point, whose deviation is zero
    np.testing.assert_allclose(cov, P, atol=1e-9 * np.abs(P).max())


def test_cholesky_jitter():
    A = np.diag([1.0, 1.0, -1e-10])
    L = cholesky_jitter(A)
    assert np.allclose(L @ L.T, A, atol=1e-8)
    with pytest.raises(NotPSD):
        cholesky_jitter(np.diag([1.0, -1.0]))


def test_zero_force_variance_gives_pure_ut_covariance():
    cfg = UkfConfig(rho=np.full(8, 123.0))
    state = probe_prior(0.5)
    prior, pts = predict_step(state, np.zeros(4), np.zeros(4), cfg, transition=lambda X, F: 2 * X)
    np.testing.assert_allclose(prior.P, 4 * 0.5 * np.eye(8), atol=1e-12)
    assert pts.shape == (17, 8)


def test_adaptive_noise_doubling():
    cfg = UkfConfig(rho=np.arange(1.0, 9.0), lambda_=np.linspace(0.5, 3.0, 6))
    u_F = np.array([1e-3, 2e-2, 3e-1, 4.0])
    u_S = np.array([1e-3, 2e-2, 3e-1, 4.0, 5e-4, 6e-5])
    np.testing.assert_array_equal(process_noise(2 * u_F, cfg), 2 * process_noise(u_F, cfg))
    np.testing.assert_array_equal(measurement_noise(2 * u_S, cfg), 2 * measurement_noise(u_S, cfg))
    np.testing.assert_array_equal(np.diag(process_noise(u_F, cfg)), cfg.rho * np.r_[u_F, u_F])


def test_measurement_noise_floor():
    R = measurement_noise(np.zeros(6), UkfConfig())
    np.testing.assert_array_equal(np.diag(R), 1e-8)


def test_scalar_update_probe():
    # independent coordinates: prior N(0, 1), measurement 1 with variance 1
    post = update_step(probe_prior(), None, np.ones(6), np.ones(6), UkfConfig(), first_six)
    np.testing.assert_allclose(post.x_hat, np.r_[np.full(6, 0.5), np.zeros(2)], atol=1e-12)
    np.testing.assert_allclose(np.diag(post.P), np.r_[np.full(6, 0.5), np.ones(2)], atol=1e-12)


def test_huge_measurement_noise_returns_prior():
    cfg = UkfConfig(lambda_=np.full(6, 1e8))
    prior = UkfState(np.arange(8.0) * 0.1, 0.3 * np.eye(8))
    post = update_step(prior, None, np.full(6, 5.0), np.ones(6), cfg, first_six)
    np.testing.assert_allclose(post.x_hat, prior.x_hat, atol=1e-4)


def test_floor_noise_residual_shrinks():
    M = 8
    truth = np.full((M, 6), 1.0)
    dist_S = PredictiveDistribution(truth, np.zeros((M, 6)), 10)
    dist_F = PredictiveDistribution(np.zeros((M, 4)), np.full((M, 4), 1e-3), 10)
    states = run_aukf(np.zeros(8), dist_F, dist_S, UkfConfig(), transition=lambda X, F: X,
                      measurement=first_six)
    residual = [np.abs(first_six(s.x_hat) - 1.0).max() for s in states]
    assert all(b <= a for a, b in zip(residual, residual[1:]))
    assert residual[-1] < 1e-4


@pytest.mark.parametrize("seed", range(4))
def test_linear_kalman_equivalence(seed):
    dm, dP = linear_equivalence(seed)
    assert dm < 1e-8 and dP < 1e-6


def test_literal_update_differs_when_noise_present():
    cfg = UkfConfig(rho=np.ones(8), redraw_sigma_points=False)
    prior, pts = predict_step(probe_prior(), np.zeros(4), np.ones(4), cfg, transition=lambda X, F: X)
    post = update_step(prior, pts, np.ones(6), np.ones(6), cfg, first_six)
    # without Q in the cross covariance the gain is that of the noise-free prior
    np.testing.assert_allclose(post.x_hat[:6], 0.5, atol=1e-12)
    cfg.redraw_sigma_points = True
    post = update_step(prior, pts, np.ones(6), np.ones(6), cfg, first_six)
    np.testing.assert_allclose(post.x_hat[:6], 2.0 / 3.0, atol=1e-12)


def test_covariance_stays_symmetric():
    rng = np.random.default_rng(2)
    M = 10
    dist_S = PredictiveDistribution(rng.normal(size=(M, 6)), rng.uniform(0.1, 1, (M, 6)), 10)
    dist_F = PredictiveDistribution(rng.normal(size=(M, 4)), rng.uniform(0.1, 1, (M, 4)), 10)
    for s in run_aukf(np.zeros(8), dist_F, dist_S, UkfConfig(rho=np.ones(8)),
                      transition=lambda X, F: np.sin(X), measurement=lambda X: np.tanh(X[..., :6])):
        np.testing.assert_array_equal(s.P, s.P.T)
        assert np.linalg.eigvalsh(s.P).min() > -1e-9


def test_singular_innovation():
    cfg = UkfConfig(var_floor=0.0)
    with pytest.raises(SingularInnovation):
        update_step(probe_prior(), None, np.zeros(6), np.zeros(6), cfg, lambda X: np.zeros(X.shape[:-1] + (6,)))


def test_divergence_is_reported_with_step():
    M = 3
    dist = PredictiveDistribution(np.ones((M, 6)), np.ones((M, 6)), 10)
    forces = PredictiveDistribution(np.zeros((M, 4)), np.zeros((M, 4)), 10)
    calls = []

    def transition(X, F):
        calls.append(1)
        return X if len(calls) < 2 else X * np.inf

    with pytest.raises(FilterDiverged) as info:
        run_aukf(np.zeros(8), forces, dist, UkfConfig(), transition=transition, measurement=first_six)
    assert info.value.step == 2


def test_horizon_mismatch():
    with pytest.raises(ValueError):
        run_aukf(np.zeros(8), PredictiveDistribution(np.zeros((3, 4)), np.zeros((3, 4)), 2),
                 PredictiveDistribution(np.zeros((4, 6)), np.zeros((4, 6)), 2), UkfConfig())


def _euler_rollout(x, F, anthro, n=20):
    out = []
    for _ in range(n):
        x = euler_step(x, F, 0.04, anthro)
        out.append(x)
    return out


def test_arm_filter_tracks_exact_measurements(anthro):
    # gravity-compensating forces; the measurements are the simulated truth
    q0 = np.array([2.2, -0.4, 1.6, 0.3])
    x0 = np.r_[q0, 0.3, -0.2, 0.5, 0.1]
    G = gravity(q0, anthro)
    xs = simulate(x0, np.tile(G, (20, 1)), 0.04, anthro, substeps=20)[1:]
    S = PredictiveDistribution(angles_to_pose(xs[:, :4]), np.full((20, 6), 1e-6), 10)
    F = PredictiveDistribution(np.tile(G, (20, 1)), np.full((20, 4), 1e-2), 10)
    states = run_aukf(initial_state(x0, UkfConfig()), F, S, UkfConfig(), anthro, f0=G)
    err = np.array([np.abs(angles_to_pose(s.x_hat[:4]) - y).max() for s, y in zip(states, S.mean)])
    open_err = np.array([np.abs(angles_to_pose(xo[:4]) - y).max()
                         for xo, y in zip(_euler_rollout(x0, G, anthro), S.mean)])
    assert err.max() < 1e-2
    assert err.mean() < 0.2 * open_err.mean()


@pytest.mark.parametrize("kwargs", [
    {"ut_alpha": 0.0}, {"ut_alpha": 1.5}, {"rho": np.ones(7)}, {"lambda_": -np.ones(6)},
    {"P0_diag": np.zeros(8)}, {"T_s": 0.0}, {"ut_kappa": -9.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        UkfConfig(**kwargs)


def test_config_dict_round_trip():
    cfg = UkfConfig(rho=np.arange(8.0), lambda_=np.full(6, 2.0))
    back = UkfConfig.from_dict(cfg.to_dict())
    np.testing.assert_array_equal(back.rho, cfg.rho)
    np.testing.assert_array_equal(back.lambda_, cfg.lambda_)
    assert "lambda" in cfg.to_dict()
