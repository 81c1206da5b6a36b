"""End-to-end refinement: two predictors, MC dropout, adaptive UKF."""

from dataclasses import dataclass

import numpy as np

from .datagen import window_starts
from .dynamics import forces_from_motion, unwrapped_angles
from .errors import BvaukfError, TooShort
from .seqmodel import MotionWindow
from .kinematics import joint_positions, measurement_jacobian, measurement_map, normalize_pose
from .ukf import initial_state, run_aukf
from .uq import mc_dropout_predict, pass_seeds


@dataclass
class RefinedPrediction:
    """Filtered horizon: ``M`` poses, states, joint tracks and pose variances."""

    poses: np.ndarray
    states: list
    elbow: np.ndarray
    wrist: np.ndarray
    pose_variances: np.ndarray
    measurement: np.ndarray = None
    pose_dist: object = None
    force_dist: object = None

    def __len__(self):
        return self.poses.shape[0]


def _tag(exc, stage):
    exc.stage = stage
    return exc


def prepare_observation(pose_seq, T_s, anthro, cfg):
    """Angles, inverse-dynamics forces and the filter's initial state.

    The initial state takes the angles of the last observed pose and the
    last central-difference velocity ``(q[-1] - q[-3]) / (2 T_s)``.
    """
    pose_seq = np.asarray(pose_seq, dtype=float)
    if pose_seq.ndim != 2 or pose_seq.shape[0] < 3:
        raise TooShort("observation needs at least 3 poses")
    q_seq = unwrapped_angles(pose_seq)
    qdot = (q_seq[-1] - q_seq[-3]) / (2.0 * T_s)
    F_seq = forces_from_motion(pose_seq, T_s, anthro)
    x0 = initial_state(np.concatenate([q_seq[-1], qdot]), cfg)
    return q_seq, F_seq, x0


def pose_variance(state):
    """Diagonal of ``J P J^T`` with ``J`` the measurement Jacobian at the mean."""
    J = measurement_jacobian(state.x_hat)
    return np.einsum("ij,jk,ik->i", J, state.P, J)


def refine(model_a, model_b, pose_seq, cfg, anthro, K=10, seed=0):
    """Filtered prediction of the next ``M`` poses after ``pose_seq``.

    The pose model's MC-dropout mean and variance become the measurements
    and measurement noise; the force model, fed with forces recovered from
    the observation, supplies inputs and process noise.  Errors carry the
    failing stage in ``exc.stage``.
    """
    seed_a, seed_b = pass_seeds(seed, 2)
    try:
        _, F_seq, x0 = prepare_observation(pose_seq, cfg.T_s, anthro, cfg)
    except BvaukfError as exc:
        raise _tag(exc, "observation")
    try:
        S_dist = mc_dropout_predict(model_a, pose_seq, K, seed_a)
        F_dist = mc_dropout_predict(model_b, F_seq, K, seed_b)
    except BvaukfError as exc:
        raise _tag(exc, "prediction")
    try:
        states = run_aukf(x0, F_dist, S_dist, cfg, anthro, f0=F_seq[-1])
    except BvaukfError as exc:
        raise _tag(exc, "filter")
    xs = np.array([s.x_hat for s in states])
    poses = measurement_map(xs)
    elbow, wrist = joint_positions(poses, anthro)
    var = np.array([pose_variance(s) for s in states])
    return RefinedPrediction(poses, states, elbow, wrist, var, normalize_pose(S_dist.mean),
                             S_dist, F_dist)


def training_windows(trajectories, kind, anthro, N=50, M=50, stride=10, T_s=0.04):
    """Observation/prediction windows for the pose or force model.

    Force windows take their inputs from the observed poses alone, exactly
    as :func:`refine` computes them, and their targets from the whole
    trajectory.
    """
    out = []
    for traj in trajectories:
        poses = np.asarray(traj.poses, dtype=float)
        starts = window_starts(poses.shape[0], N, M, stride)
        if kind == "pose":
            out.extend(MotionWindow(poses[s:s + N], poses[s + N:s + N + M]) for s in starts)
        elif kind == "force":
            if not starts:
                continue
            F = forces_from_motion(poses, T_s, anthro)
            out.extend(MotionWindow(forces_from_motion(poses[s:s + N], T_s, anthro), F[s + N:s + N + M])
                       for s in starts)
        else:
            raise ValueError(f"unknown model kind {kind!r}")
    return out
