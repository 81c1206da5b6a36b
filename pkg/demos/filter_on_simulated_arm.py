"""
Refining a noisy forecast with the adaptive filter
==================================================

The filter treats a forecast pose sequence as measurements and a forecast
force sequence as inputs.  Here both forecasts are synthetic: the true
motion corrupted by noise whose spread grows along the horizon, so the
per-step variances tell the filter how far to trust each source.
"""

import numpy as np

from bvaukf.dynamics import gravity, simulate
from bvaukf.kinematics import Anthropometrics, angles_to_pose, joint_positions
from bvaukf.ukf import UkfConfig, initial_state, run_aukf
from bvaukf.uq import PredictiveDistribution

arm = Anthropometrics()
rng = np.random.default_rng(0)
T_s, M = 0.04, 25

q0 = np.array([2.2, -0.4, 1.6, 0.3])
x0 = np.r_[q0, 0.3, -0.2, 0.5, 0.1]
F_true = np.tile(gravity(q0, arm), (M, 1))
truth = simulate(x0, F_true, T_s, arm, substeps=20)[1:]
S_true = angles_to_pose(truth[:, :4])

# forecast spread grows linearly along the horizon
sd = np.linspace(0.005, 0.05, M)[:, None]
S_noisy = S_true + sd * rng.normal(size=S_true.shape)
S_noisy /= np.repeat(np.linalg.norm(S_noisy.reshape(M, 2, 3), axis=-1), 3, axis=1)
poses = PredictiveDistribution(S_noisy, np.repeat(sd**2, 6, axis=1), 10)
forces = PredictiveDistribution(F_true + 0.05 * rng.normal(size=F_true.shape), np.full((M, 4), 0.05**2), 10)

cfg = UkfConfig()
states = run_aukf(initial_state(x0, cfg), forces, poses, cfg, arm, f0=F_true[0])
S_filt = angles_to_pose(np.array([s.x_hat[:4] for s in states]))

# compare wrist errors of the raw forecast and the filtered estimate
_, w_true = joint_positions(S_true, arm)
_, w_raw = joint_positions(S_noisy, arm)
_, w_filt = joint_positions(S_filt, arm)
e_raw = 1000 * np.linalg.norm(w_raw - w_true, axis=1)
e_filt = 1000 * np.linalg.norm(w_filt - w_true, axis=1)
for m in range(0, M, 4):
    print(f"step {m + 1:2d}  forecast {e_raw[m]:6.2f} mm  filtered {e_filt[m]:6.2f} mm")
print(f"mean     forecast {e_raw.mean():6.2f} mm  filtered {e_filt.mean():6.2f} mm")
