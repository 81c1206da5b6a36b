"""
Arm dynamics in bone-vector coordinates
=======================================

A two-segment arm is described by the directions of its upper arm and
forearm.  This walk-through builds a pose, evaluates the rigid-body terms and
checks that recovered forces match the ones that drove a simulation.
"""

import numpy as np

from bvaukf.dynamics import forces_from_motion, gravity, mass_matrix, simulate, total_energy
from bvaukf.kinematics import Anthropometrics, angles_to_pose, joint_positions

arm = Anthropometrics()

# a pose is two unit vectors; angles are polar (from +z) and azimuth
q = np.array([2.0, 0.3, 1.6, 0.8])
pose = angles_to_pose(q)
elbow, wrist = joint_positions(pose, arm)
print("bone vectors", np.round(pose, 3))
print("elbow", np.round(elbow, 3), "wrist", np.round(wrist, 3))

# the mass matrix couples the two segments; gravity pulls both down
print("mass matrix\n", np.round(mass_matrix(q, arm), 4))
print("gravity torque", np.round(gravity(q, arm), 4))

# hold the arm against gravity plus a gentle push, sampled at 25 Hz
T_s = 0.04
push = np.array([0.05, 0.0, -0.03, 0.01])
F = np.tile(gravity(q, arm) + push, (20, 1))
xs = simulate(np.r_[q, np.zeros(4)], F, T_s, arm, substeps=20)
print("energy gained over 0.8 s: %.4f J" % (total_energy(xs[-1], arm) - total_energy(xs[0], arm)))

# finite differences of the observed poses give the forces back
F_hat = forces_from_motion(angles_to_pose(xs[:, :4]), T_s, arm)
err = np.abs(F_hat[1:-1] - F[:-1]).max()
print("largest interior force error %.2e" % err)
