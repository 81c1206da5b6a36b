"""Euler-Lagrange dynamics of a two-segment arm with a fixed shoulder.

Each segment is a uniform thin rod rotating about its proximal joint.  With
bone directions ``s_a(phi1, theta1)`` and ``s_b(phi2, theta2)`` the kinetic
energy is::

    T = (m_a l_a^2 / 6) |ds_a|^2 + (m_b / 2) |l_a ds_a|^2
        + (m_b l_b^2 / 6) |ds_b|^2 + (m_b l_b / 2) (l_a ds_a) . ds_b

and the potential energy is::

    V = m_a g (l_a / 2) cos(phi1) + m_b g (l_a cos(phi1) + (l_b / 2) cos(phi2))

which gives ``F = M(q) qdd + C(q, qd) + G(q)`` with ``C`` built from the
Christoffel symbols of ``M``.  States are 8-vectors ``x = [q; qd]``.
Functions broadcast over leading axes unless noted otherwise.
"""

import numpy as np

from .errors import SingularMass, TooShort
from .kinematics import direction_jacobian, pose_to_angles

EPS_REG = 1e-9
REG_COND = 1e8
MAX_COND = 1e12


def _inertia_coeffs(a):
    c_a = a.m_a * a.l_a**2 / 3.0 + a.m_b * a.l_a**2
    c_b = a.m_b * a.l_b**2 / 3.0
    k = 0.5 * a.m_b * a.l_a * a.l_b
    return c_a, c_b, k


def _direction_hessian(phi, theta):
    """Return ``(dJ/dphi, dJ/dtheta)`` for :func:`direction_jacobian`, each ``(..., 3, 2)``."""
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    zero = np.zeros_like(sp)
    s_pp = np.stack([-sp * ct, -sp * st, -cp], axis=-1)
    s_pt = np.stack([-cp * st, cp * ct, zero], axis=-1)
    s_tt = np.stack([-sp * ct, -sp * st, zero], axis=-1)
    return np.stack([s_pp, s_pt], axis=-1), np.stack([s_pt, s_tt], axis=-1)


def _blocks_to_matrix(aa, ab, bb):
    top = np.concatenate([aa, ab], axis=-1)
    bottom = np.concatenate([np.swapaxes(ab, -1, -2), bb], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def _t(m):
    return np.swapaxes(m, -1, -2)


def mass_matrix(q, a):
    """Inertia matrix ``M(q)``, shape ``(..., 4, 4)``."""
    q = np.asarray(q, dtype=float)
    c_a, c_b, k = _inertia_coeffs(a)
    Ja = direction_jacobian(q[..., 0], q[..., 1])
    Jb = direction_jacobian(q[..., 2], q[..., 3])
    M = _blocks_to_matrix(c_a * _t(Ja) @ Ja, k * _t(Ja) @ Jb, c_b * _t(Jb) @ Jb)
    # exact symmetry, independent of matmul rounding
    return 0.5 * (M + _t(M))


def mass_matrix_derivatives(q, a):
    """Partial derivatives ``dM/dq_i`` stacked as ``(..., 4, 4, 4)`` with ``i`` first."""
    q = np.asarray(q, dtype=float)
    c_a, c_b, k = _inertia_coeffs(a)
    Ja = direction_jacobian(q[..., 0], q[..., 1])
    Jb = direction_jacobian(q[..., 2], q[..., 3])
    dJa = _direction_hessian(q[..., 0], q[..., 1])
    dJb = _direction_hessian(q[..., 2], q[..., 3])
    zero = np.zeros(q.shape[:-1] + (2, 2))
    out = []
    for dJ in dJa:
        aa = c_a * (_t(dJ) @ Ja + _t(Ja) @ dJ)
        out.append(_blocks_to_matrix(aa, k * _t(dJ) @ Jb, zero))
    for dJ in dJb:
        bb = c_b * (_t(dJ) @ Jb + _t(Jb) @ dJ)
        out.append(_blocks_to_matrix(zero, k * _t(Ja) @ dJ, bb))
    return np.stack(out, axis=-3)


def christoffel(q, a):
    """Christoffel symbols of the first kind ``Gamma[..., i, j, k]``."""
    dM = mass_matrix_derivatives(q, a)
    # dM[..., k, i, j] = dM_ij / dq_k
    d_k_ij = np.moveaxis(dM, -3, -1)        # [i, j, k] = dM_ij/dq_k
    d_j_ik = np.swapaxes(d_k_ij, -1, -2)    # [i, j, k] = dM_ik/dq_j
    d_i_jk = dM                             # [i, j, k] = dM_jk/dq_i
    return 0.5 * (d_k_ij + d_j_ik - d_i_jk)


def coriolis(q, qdot, a):
    """Velocity coupling vector ``C(q, qd)``, quadratic in ``qd``."""
    qdot = np.asarray(qdot, dtype=float)
    dM = mass_matrix_derivatives(q, a)
    # Mdot = sum_k dM_k qd_k
    Mdot = np.einsum("...kij,...k->...ij", dM, qdot)
    quad = np.einsum("...kij,...i,...j->...k", dM, qdot, qdot)
    return np.einsum("...ij,...j->...i", Mdot, qdot) - 0.5 * quad


def gravity(q, a):
    """Gravity vector ``G(q) = dV/dq``."""
    q = np.asarray(q, dtype=float)
    G = np.zeros(q.shape)
    G[..., 0] = -(a.m_a * 0.5 + a.m_b) * a.g * a.l_a * np.sin(q[..., 0])
    G[..., 2] = -a.m_b * a.g * 0.5 * a.l_b * np.sin(q[..., 2])
    return G


def kinetic_energy(q, qdot, a):
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * np.einsum("...i,...ij,...j->...", qdot, mass_matrix(q, a), qdot)


def potential_energy(q, a):
    q = np.asarray(q, dtype=float)
    return a.g * (a.m_a * 0.5 * a.l_a * np.cos(q[..., 0])
                  + a.m_b * (a.l_a * np.cos(q[..., 0]) + 0.5 * a.l_b * np.cos(q[..., 2])))


def total_energy(x, a):
    x = np.asarray(x, dtype=float)
    return kinetic_energy(x[..., :4], x[..., 4:], a) + potential_energy(x[..., :4], a)


def inverse_dynamics(q, qdot, qddot, a):
    """Generalized joint forces ``F = M qdd + C + G``."""
    M = mass_matrix(q, a)
    return (np.einsum("...ij,...j->...i", M, np.asarray(qddot, dtype=float))
            + coriolis(q, qdot, a) + gravity(q, a))


def forward_dynamics(x, F, a):
    """State derivative ``[qd; M^-1 (F - C - G)]``.

    Where ``M`` is ill-conditioned (condition number above ``REG_COND``,
    i.e. near a pole) it is replaced by ``M + EPS_REG I``; elsewhere the
    solve is exact so that :func:`inverse_dynamics` inverts it.

    Raises
    ------
    SingularMass
        If the (regularized) mass matrix is not finite or its condition
        number exceeds ``MAX_COND``.
    """
    x = np.asarray(x, dtype=float)
    q, qdot = x[..., :4], x[..., 4:]
    M = mass_matrix(q, a)
    if not np.all(np.isfinite(M)):
        raise SingularMass("mass matrix is not finite")
    ill = np.linalg.cond(M) > REG_COND
    M = M + EPS_REG * np.eye(4) * np.asarray(ill, dtype=float)[..., None, None]
    cond = np.linalg.cond(M)
    if not np.all(np.isfinite(cond)) or np.any(cond > MAX_COND):
        raise SingularMass(f"mass matrix condition number {np.max(cond):.3g} exceeds {MAX_COND:g}")
    rhs = np.asarray(F, dtype=float) - coriolis(q, qdot, a) - gravity(q, a)
    rhs = np.broadcast_to(rhs, qdot.shape)
    qddot = np.linalg.solve(M, rhs[..., None])[..., 0]
    return np.concatenate([qdot, qddot], axis=-1)


def euler_step(x, F, T_s, a):
    """One explicit Euler step; this is the filter's transition function."""
    if T_s <= 0:
        raise ValueError("T_s must be positive")
    x = np.asarray(x, dtype=float)
    return x + T_s * forward_dynamics(x, F, a)


def rk4_step(x, F, T_s, a):
    """Classical Runge-Kutta step with ``F`` held constant."""
    if T_s <= 0:
        raise ValueError("T_s must be positive")
    x = np.asarray(x, dtype=float)
    k1 = forward_dynamics(x, F, a)
    k2 = forward_dynamics(x + 0.5 * T_s * k1, F, a)
    k3 = forward_dynamics(x + 0.5 * T_s * k2, F, a)
    k4 = forward_dynamics(x + T_s * k3, F, a)
    return x + (T_s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(x0, forces, T_s, a, substeps=1):
    """Integrate with RK4 under piecewise-constant forces.

    ``forces`` has one row per output interval; each interval is split into
    ``substeps`` RK4 steps.  Returns ``len(forces) + 1`` states including ``x0``.
    """
    forces = np.atleast_2d(np.asarray(forces, dtype=float))
    h = T_s / substeps
    xs = [np.asarray(x0, dtype=float)]
    x = xs[0]
    for F in forces:
        for _ in range(substeps):
            x = rk4_step(x, F, h, a)
        xs.append(x)
    return np.array(xs)


def finite_diff_derivatives(q_seq, T_s):
    """Velocities and accelerations of a uniformly sampled sequence.

    Interior points use central differences; the end points use one-sided
    second-order stencils (three points for velocity, four for acceleration
    when available).

    Returns
    -------
    qdot, qddot : ndarray, same shape as ``q_seq``
    """
    q = np.asarray(q_seq, dtype=float)
    n = q.shape[0]
    if n < 3:
        raise TooShort(f"need at least 3 samples, got {n}")
    qdot = np.gradient(q, T_s, axis=0, edge_order=2)
    qddot = np.empty_like(q)
    qddot[1:-1] = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / T_s**2
    if n >= 4:
        qddot[0] = (2.0 * q[0] - 5.0 * q[1] + 4.0 * q[2] - q[3]) / T_s**2
        qddot[-1] = (2.0 * q[-1] - 5.0 * q[-2] + 4.0 * q[-3] - q[-4]) / T_s**2
    else:
        qddot[0] = qddot[1]
        qddot[-1] = qddot[1]
    return qdot, qddot


def unwrapped_angles(pose_seq):
    """Joint angles of a pose sequence with azimuths unwrapped over time."""
    q = pose_to_angles(pose_seq)
    q[:, [1, 3]] = np.unwrap(q[:, [1, 3]], axis=0)
    return q


def forces_from_motion(pose_seq, T_s, a):
    """Generalized forces reproducing an observed pose sequence (inverse dynamics)."""
    pose_seq = np.asarray(pose_seq, dtype=float)
    if pose_seq.ndim != 2 or pose_seq.shape[0] < 3:
        raise TooShort("need a sequence of at least 3 poses")
    q = unwrapped_angles(pose_seq)
    qdot, qddot = finite_diff_derivatives(q, T_s)
    return inverse_dynamics(q, qdot, qddot, a)
