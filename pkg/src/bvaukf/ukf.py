"""Adaptive unscented Kalman filter over the arm state ``x = [q; qd]``.

Process noise at step ``m`` is ``diag(rho * [u_F; u_F])`` where ``u_F`` is the
predicted force variance; measurement noise is ``diag(max(lam * u_S, floor))``
with ``u_S`` the predicted pose variance.  Both therefore change every step.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import euler_step
from .errors import BvaukfError, FilterDiverged, NotPSD, SingularInnovation
from .kinematics import measurement_map
from .uq import VAR_FLOOR, surrogate_measurement

STATE_DIM = 8
JITTER_START = 1e-12
JITTER_MAX = 1e-6


def default_rho(T_s):
    return np.concatenate([np.full(4, (T_s**2 / 2.0) ** 2), np.full(4, T_s**2)])


@dataclass
class UkfConfig:
    ut_alpha: float = 1.0
    ut_beta: float = 2.0
    ut_kappa: float = 0.0
    rho: np.ndarray = None
    lambda_: np.ndarray = field(default_factory=lambda: np.ones(6))
    P0_diag: np.ndarray = field(
        default_factory=lambda: np.concatenate([np.full(4, 1e-4), np.full(4, 1e-2)]))
    T_s: float = 0.04
    var_floor: float = VAR_FLOOR
    redraw_sigma_points: bool = True

    def __post_init__(self):
        if self.rho is None:
            self.rho = default_rho(self.T_s)
        self.rho = np.asarray(self.rho, dtype=float)
        self.lambda_ = np.asarray(self.lambda_, dtype=float)
        self.P0_diag = np.asarray(self.P0_diag, dtype=float)
        if not 0.0 < self.ut_alpha <= 1.0:
            raise ValueError("ut_alpha must lie in (0, 1]")
        if self.rho.shape != (8,) or self.lambda_.shape != (6,) or self.P0_diag.shape != (8,):
            raise ValueError("rho, lambda and P0_diag must have 8, 6 and 8 entries")
        if np.any(self.rho < 0) or np.any(self.lambda_ < 0):
            raise ValueError("rho and lambda must be non-negative")
        if np.any(self.P0_diag <= 0):
            raise ValueError("P0_diag must be positive")
        if self.T_s <= 0:
            raise ValueError("T_s must be positive")
        if STATE_DIM + self.ut_lambda <= 0:
            raise ValueError("alpha^2 (L + kappa) must be positive")

    @property
    def ut_lambda(self):
        return self.ut_alpha**2 * (STATE_DIM + self.ut_kappa) - STATE_DIM

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        return cls(**d)

    def to_dict(self):
        return {
            "ut_alpha": self.ut_alpha,
            "ut_beta": self.ut_beta,
            "ut_kappa": self.ut_kappa,
            "rho": self.rho.tolist(),
            "lambda": self.lambda_.tolist(),
            "P0_diag": self.P0_diag.tolist(),
            "T_s": self.T_s,
            "var_floor": self.var_floor,
            "redraw_sigma_points": self.redraw_sigma_points,
        }


@dataclass
class UkfState:
    x_hat: np.ndarray
    P: np.ndarray


def cholesky_jitter(A):
    """Lower Cholesky factor, adding escalating diagonal jitter on failure."""
    A = 0.5 * (A + A.T)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(A.shape[0])
    while jitter <= JITTER_MAX:
        try:
            return np.linalg.cholesky(A + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NotPSD(f"matrix not positive definite even with jitter {JITTER_MAX:g}")


def ut_weights(cfg, L=STATE_DIM):
    lam = cfg.ut_alpha**2 * (L + cfg.ut_kappa) - L
    wm = np.full(2 * L + 1, 0.5 / (L + lam))
    wc = wm.copy()
    wm[0] = lam / (L + lam)
    wc[0] = wm[0] + 1.0 - cfg.ut_alpha**2 + cfg.ut_beta
    return wm, wc


def sigma_points(x_hat, P, cfg):
    """Scaled unscented-transform sigma points.

    Returns
    -------
    points : ndarray, shape (2L+1, L)
        ``x_hat``, then ``x_hat + col_i``, then ``x_hat - col_i`` for the
        columns of the lower Cholesky factor of ``(L + lambda) P``.
    wm, wc : ndarray, shape (2L+1,)
        Mean and covariance weights.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    L = x_hat.shape[0]
    lam = cfg.ut_alpha**2 * (L + cfg.ut_kappa) - L
    S = cholesky_jitter((L + lam) * np.asarray(P, dtype=float))
    points = np.vstack([x_hat, x_hat + S.T, x_hat - S.T])
    wm, wc = ut_weights(cfg, L)
    return points, wm, wc


def unscented_moments(points, wm, wc):
    mean = wm @ points
    dev = points - mean
    return mean, (wc[:, None] * dev).T @ dev


def process_noise(u_F, cfg):
    u_F = np.asarray(u_F, dtype=float)
    return np.diag(cfg.rho * np.concatenate([u_F, u_F]))


def measurement_noise(u_S, cfg):
    return np.diag(np.maximum(cfg.lambda_ * np.asarray(u_S, dtype=float), cfg.var_floor))


def _symmetrize(P):
    return 0.5 * (P + P.T)


def arm_transition(anthro, T_s):
    """Euler transition of the arm model, applied to every sigma point."""
    def transition(points, F):
        return euler_step(points, F, T_s, anthro)
    return transition


def predict_step(state, F_hat, u_F, cfg, anthro=None, transition=None):
    """Propagate the sigma points of ``state`` through the transition model.

    Returns
    -------
    prior : UkfState
        Predicted mean and covariance including process noise.
    points_pred : ndarray, shape (2L+1, L)
        Propagated sigma points, reused by :func:`update_step`.

    Raises
    ------
    FilterDiverged
        If a propagated sigma point or the predicted moments are not finite.
    """
    if transition is None:
        transition = arm_transition(anthro, cfg.T_s)
    points, wm, wc = sigma_points(state.x_hat, state.P, cfg)
    with np.errstate(over="ignore", invalid="ignore"):
        points_pred = np.asarray(transition(points, np.asarray(F_hat, dtype=float)), dtype=float)
        mean, cov = unscented_moments(points_pred, wm, wc)
    if not (np.all(np.isfinite(points_pred)) and np.all(np.isfinite(cov))):
        raise FilterDiverged("propagated state is not finite")
    cov = _symmetrize(cov + process_noise(u_F, cfg))
    return UkfState(mean, cov), points_pred


def update_step(prior, points_pred, y_star, u_S, cfg, measurement=None):
    """Measurement update.

    With ``cfg.redraw_sigma_points`` (the default) fresh sigma points are
    drawn from ``prior`` so the additive process noise reaches the
    innovation and cross covariances; otherwise ``points_pred`` is mapped
    through the measurement function directly.

    Raises
    ------
    SingularInnovation
        If the innovation covariance cannot be factorized.
    """
    if measurement is None:
        measurement = measurement_map
    y_star = np.asarray(y_star, dtype=float)
    if cfg.redraw_sigma_points:
        points_pred, wm, wc = sigma_points(prior.x_hat, prior.P, cfg)
    else:
        wm, wc = ut_weights(cfg, points_pred.shape[1])
    Z = np.asarray(measurement(points_pred), dtype=float)
    if Z.shape[1] != y_star.shape[0] or y_star.shape[0] != cfg.lambda_.shape[0]:
        raise ValueError("measurement, y_star and lambda dimensions disagree")
    y_pred = wm @ Z
    beta = Z - y_pred
    alpha = points_pred - prior.x_hat
    Py = _symmetrize((wc[:, None] * beta).T @ beta + measurement_noise(u_S, cfg))
    Pxy = (wc[:, None] * alpha).T @ beta
    try:
        cho = np.linalg.cholesky(Py)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation("innovation covariance is not positive definite") from exc
    # K = Pxy Py^-1 through the Cholesky factor
    K = np.linalg.solve(cho.T, np.linalg.solve(cho, Pxy.T)).T
    if not np.all(np.isfinite(K)):
        raise SingularInnovation("Kalman gain is not finite")
    x_hat = prior.x_hat + K @ (y_star - y_pred)
    P = _symmetrize(prior.P - K @ Py @ K.T)
    return UkfState(x_hat, P)


def initial_state(x0, cfg):
    return UkfState(np.asarray(x0, dtype=float), np.diag(cfg.P0_diag))


def run_aukf(x0, F_dist, S_dist, cfg, anthro=None, f0=None, transition=None, measurement=None):
    """Recursively refine a predicted horizon.

    Step ``m`` (1-based) predicts with force ``F_{m-1}`` and variance
    ``u_F[m]``, then updates with measurement ``y*_m`` and variance
    ``u_S[m]``.  Forces are ``[f0, F_dist.mean[0], ..., F_dist.mean[M-2]]``;
    without ``f0`` the first predicted force is used for step 1.

    With the default arm measurement map, ``y*`` is the renormalized pose
    mean.  A custom ``measurement`` uses ``S_dist.mean`` as is.

    Returns
    -------
    list of UkfState
        One refined state per step.
    """
    M = S_dist.mean.shape[0]
    if F_dist.mean.shape[0] != M:
        raise ValueError("force and pose distributions must share the horizon")
    if M == 0:
        return []
    if measurement is None:
        y_star, _ = surrogate_measurement(S_dist, cfg.lambda_, cfg.var_floor)
    else:
        y_star = np.asarray(S_dist.mean, dtype=float)
    first = F_dist.mean[0] if f0 is None else np.asarray(f0, dtype=float)
    forces = np.vstack([first[None], F_dist.mean[:-1]])
    state = x0 if isinstance(x0, UkfState) else initial_state(x0, cfg)
    out = []
    for m in range(M):
        try:
            prior, pts = predict_step(state, forces[m], F_dist.variance[m], cfg, anthro, transition)
            state = update_step(prior, pts, y_star[m], S_dist.variance[m], cfg, measurement)
        except BvaukfError as exc:
            err = type(exc)(f"filter step {m + 1}: {exc}")
            err.step = m + 1
            raise err from exc
        out.append(state)
    return out
