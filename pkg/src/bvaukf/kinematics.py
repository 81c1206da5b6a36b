"""Arm kinematics in bone-vector form.

Joint angles are stored as ``q = [phi1, theta1, phi2, theta2]`` where
``phi`` is the polar angle of a segment measured from the vertical axis
``a3`` and ``theta`` the azimuth in the horizontal plane measured from
``a1``.  The elbow frame is a translated copy of the shoulder frame, so both
segments use the same world axes.  ``a3`` points up and gravity acts along
``-a3``.

An arm pose is the 6-vector ``[s_a; s_b]`` of unit bone vectors for the
upper arm and the forearm.  All functions broadcast over leading axes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPose

POLE_EPS = 1e-8
UNIT_TOL = 1e-6


@dataclass(frozen=True)
class Anthropometrics:
    """Segment lengths (m), masses (kg), gravity (m/s^2), shoulder position (m)."""

    l_a: float = 0.3
    l_b: float = 0.25
    m_a: float = 2.0
    m_b: float = 1.5
    g: float = 9.81
    shoulder_pos: tuple = field(default=(0.0, 0.0, 0.0))

    def __post_init__(self):
        if min(self.l_a, self.l_b, self.m_a, self.m_b) <= 0:
            raise ValueError("segment lengths and masses must be positive")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if len(self.shoulder_pos) != 3:
            raise ValueError("shoulder_pos must have 3 components")
        object.__setattr__(self, "shoulder_pos", tuple(float(v) for v in self.shoulder_pos))

    @property
    def shoulder(self):
        return np.asarray(self.shoulder_pos, dtype=float)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return {
            "l_a": self.l_a,
            "l_b": self.l_b,
            "m_a": self.m_a,
            "m_b": self.m_b,
            "g": self.g,
            "shoulder_pos": list(self.shoulder_pos),
        }


def _direction(phi, theta):
    sp = np.sin(phi)
    return np.stack([sp * np.cos(theta), sp * np.sin(theta), np.cos(phi)], axis=-1)


def angles_to_pose(q):
    """Map joint angles ``(..., 4)`` to bone vectors ``(..., 6)``."""
    q = np.asarray(q, dtype=float)
    s_a = _direction(q[..., 0], q[..., 1])
    s_b = _direction(q[..., 2], q[..., 3])
    return np.concatenate([s_a, s_b], axis=-1)


def _segment_angles(s):
    phi = np.arccos(np.clip(s[..., 2], -1.0, 1.0))
    theta = np.arctan2(s[..., 1], s[..., 0])
    # atan2 returns -pi for (-0, -x); keep theta in (-pi, pi]
    theta = np.where(theta <= -np.pi, np.pi, theta)
    theta = np.where(np.sin(phi) < POLE_EPS, 0.0, theta)
    return phi, theta


def pose_to_angles(pose, tol=UNIT_TOL):
    """Inverse of :func:`angles_to_pose`.

    Raises
    ------
    InvalidPose
        If either bone vector deviates from unit norm by more than ``tol``.
    """
    pose = np.asarray(pose, dtype=float)
    if pose.shape[-1] != 6:
        raise InvalidPose(f"pose must have 6 components, got shape {pose.shape}")
    s_a, s_b = pose[..., :3], pose[..., 3:]
    norms = np.stack([np.linalg.norm(s_a, axis=-1), np.linalg.norm(s_b, axis=-1)])
    if not np.all(np.isfinite(norms)) or np.any(np.abs(norms - 1.0) > tol):
        raise InvalidPose("bone vectors must be unit norm")
    phi1, theta1 = _segment_angles(s_a)
    phi2, theta2 = _segment_angles(s_b)
    return np.stack([phi1, theta1, phi2, theta2], axis=-1)


def normalize_pose(pose):
    """Rescale each 3-vector of ``(..., 6)`` poses to unit length."""
    pose = np.asarray(pose, dtype=float)
    s_a, s_b = pose[..., :3], pose[..., 3:]
    return np.concatenate(
        [s_a / np.linalg.norm(s_a, axis=-1, keepdims=True),
         s_b / np.linalg.norm(s_b, axis=-1, keepdims=True)],
        axis=-1,
    )


def joint_positions(pose, anthro):
    """Return ``(elbow, wrist)`` Cartesian positions for ``(..., 6)`` poses."""
    pose = np.asarray(pose, dtype=float)
    elbow = anthro.shoulder + anthro.l_a * pose[..., :3]
    wrist = elbow + anthro.l_b * pose[..., 3:]
    return elbow, wrist


def measurement_map(x):
    """UKF measurement function: bone vectors of the position part of ``x``."""
    x = np.asarray(x, dtype=float)
    return angles_to_pose(x[..., :4])


def measurement_jacobian(x):
    """Analytic Jacobian ``d measurement_map / dx`` with shape ``(6, 8)``."""
    x = np.asarray(x, dtype=float)
    J = np.zeros((6, 8))
    J[:3, :2] = direction_jacobian(x[0], x[1])
    J[3:, 2:4] = direction_jacobian(x[2], x[3])
    return J


def direction_jacobian(phi, theta):
    """Derivative of the unit direction w.r.t. ``(phi, theta)``, shape ``(..., 3, 2)``."""
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    zero = np.zeros_like(sp)
    d_phi = np.stack([cp * ct, cp * st, -sp], axis=-1)
    d_theta = np.stack([-sp * st, sp * ct, zero], axis=-1)
    return np.stack([d_phi, d_theta], axis=-1)
