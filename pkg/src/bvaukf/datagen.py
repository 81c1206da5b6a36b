"""Synthetic reaching trajectories standing in for motion-capture recordings.

The wrist follows minimum-jerk segments between jittered waypoints; the
elbow is placed on the two-link inverse-kinematics circle by a slowly
drifting swivel angle.  Smooth 2 mm noise is added to both joints before
they are converted to bone vectors.  Coordinates: shoulder at the origin,
``x`` forward, ``y`` to the subject's left, ``z`` up; the modelled arm is
the right arm.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import gaussian_filter1d

from .errors import DataError, TooShort, Unreachable
from .kinematics import Anthropometrics, normalize_pose
from .seqmodel import MotionWindow

T_S = 0.04
CSV_HEADER = ["t", "sa_x", "sa_y", "sa_z", "sb_x", "sb_y", "sb_z"]
MIN_SIN_PHI = 0.05
CLASSES = ("A", "B", "C")
DEFAULT_COUNTS = {"A": 132, "B": 144, "C": 152}

# hand rest position on the desk and the key positions of each motion class
_REST = (0.30, -0.22, -0.22)
_WAYPOINTS = {
    "A": [_REST, (0.44, -0.10, -0.06), _REST],
    "B": [_REST, (0.22, 0.22, -0.12), _REST],
    "C": [_REST, (0.40, -0.05, -0.24), (0.22, -0.38, -0.10), _REST],
}
_DURATIONS = {"A": [1.1, 1.1], "B": [1.2, 1.2], "C": [0.9, 1.1, 1.1]}


@dataclass
class MotionSpec:
    """Recipe for one motion class.

    ``waypoints`` are wrist targets (m) including start and end.  Every
    trajectory jitters them by ``sigma_wp`` and the segment ``durations`` by
    ``sigma_t``; ``dwell`` is the pause at intermediate waypoints and
    ``rest`` the pause before the first and after the last segment.
    """

    motion_class: str
    waypoints: list
    durations: list
    sigma_wp: float = 0.02
    sigma_t: float = 0.1
    dwell: float = 0.3
    rest: tuple = (0.8, 1.8)
    swivel_mean: float = -0.6
    swivel_sigma: float = 0.15
    swivel_knot_spacing: float = 1.0
    noise_sigma: float = 0.002
    noise_cutoff_hz: float = 5.0

    def __post_init__(self):
        self.waypoints = [np.asarray(w, dtype=float) for w in self.waypoints]
        if len(self.durations) != len(self.waypoints) - 1:
            raise DataError("need one duration per segment")
        if min(self.durations) <= 0:
            raise DataError("segment durations must be positive")


def default_spec(motion_class):
    if motion_class not in _WAYPOINTS:
        raise DataError(f"unknown motion class {motion_class!r}")
    return MotionSpec(motion_class, _WAYPOINTS[motion_class], list(_DURATIONS[motion_class]))


@dataclass
class Trajectory:
    t: np.ndarray
    poses: np.ndarray
    motion_class: str = ""
    seed: int = 0

    def __len__(self):
        return self.poses.shape[0]


def min_jerk(p0, p1, tau):
    """Minimum-jerk interpolation for normalized time ``tau`` in [0, 1]."""
    tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)[..., None]
    s = tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)
    return p0 + (p1 - p0) * s


def _wrist_path(t, points, starts, durations):
    out = np.repeat(points[0][None], t.shape[0], axis=0)
    for p0, p1, t0, T in zip(points[:-1], points[1:], starts, durations):
        after = t >= t0
        out[after] = min_jerk(p0, p1, (t[after] - t0) / T)
    return out


def elbow_from_wrist(wrist, swivel, anthro):
    """Two-link inverse kinematics with the elbow placed by a swivel angle.

    ``swivel = 0`` puts the elbow at the lowest point of its feasible circle;
    positive angles rotate it right-handedly about the shoulder-to-wrist axis.
    """
    rel = np.asarray(wrist, dtype=float) - anthro.shoulder
    d = np.linalg.norm(rel, axis=-1, keepdims=True)
    if np.any(d > anthro.l_a + anthro.l_b - 1e-3) or np.any(d < abs(anthro.l_a - anthro.l_b) + 1e-3):
        raise Unreachable("wrist target outside the reachable shell")
    n = rel / d
    along = (anthro.l_a**2 - anthro.l_b**2 + d**2) / (2.0 * d)
    radius = np.sqrt(np.maximum(anthro.l_a**2 - along**2, 0.0))
    down = np.array([0.0, 0.0, -1.0])
    u = down - (n @ down)[..., None] * n
    u_norm = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(u_norm < 1e-6):
        raise Unreachable("wrist directly above or below the shoulder")
    u = u / u_norm
    v = np.cross(n, u)
    sw = np.asarray(swivel, dtype=float)[..., None]
    return anthro.shoulder + along * n + radius * (np.cos(sw) * u + np.sin(sw) * v)


def _smooth_noise(rng, shape, sigma, cutoff_hz, T_s):
    # gaussian kernel whose -3 dB point sits at the cutoff frequency
    kernel_sigma = np.sqrt(np.log(2.0)) / (2.0 * np.pi * cutoff_hz * T_s)
    white = rng.standard_normal(shape)
    smooth = gaussian_filter1d(white, kernel_sigma, axis=0, mode="nearest")
    return sigma * smooth / smooth.std(axis=0, keepdims=True)


def min_sin_phi(poses):
    poses = np.asarray(poses, dtype=float)
    return float(np.min(np.sqrt(1.0 - np.clip(poses[:, [2, 5]], -1, 1) ** 2)))


def gen_trajectory(spec, anthro=None, seed=0, T_s=T_S, min_length=None):
    """Generate one trajectory of ``spec`` sampled every ``T_s`` seconds.

    ``min_length`` (frames) extends the final rest so short draws still
    produce at least one observation/prediction window.

    Raises
    ------
    Unreachable
        If a jittered waypoint leaves the reachable shell.
    """
    anthro = anthro or Anthropometrics()
    rng = np.random.default_rng(seed)
    points = np.array([w + rng.normal(0.0, spec.sigma_wp, 3) for w in spec.waypoints])
    points[-1] = points[0]  # motions return to where they started
    durations = np.maximum(np.asarray(spec.durations) + rng.normal(0.0, spec.sigma_t, len(spec.durations)),
                           0.3)
    rest_pre, rest_post = rng.uniform(*spec.rest, size=2)
    starts = rest_pre + np.concatenate([[0.0], np.cumsum(durations[:-1] + spec.dwell)])
    total = starts[-1] + durations[-1] + rest_post
    n = int(np.floor(total / T_s)) + 1
    if min_length is not None:
        n = max(n, min_length)
    t = np.arange(n) * T_s

    wrist = _wrist_path(t, points, starts, durations)
    n_knots = int(np.ceil(t[-1] / spec.swivel_knot_spacing)) + 2
    knots_t = np.linspace(0.0, t[-1], n_knots)
    knots = spec.swivel_mean + rng.normal(0.0, spec.swivel_sigma, n_knots)
    swivel = CubicSpline(knots_t, knots, bc_type="natural")(t)
    elbow = elbow_from_wrist(wrist, swivel, anthro)

    elbow = elbow + _smooth_noise(rng, elbow.shape, spec.noise_sigma, spec.noise_cutoff_hz, T_s)
    wrist = wrist + _smooth_noise(rng, wrist.shape, spec.noise_sigma, spec.noise_cutoff_hz, T_s)
    poses = normalize_pose(np.concatenate([elbow - anthro.shoulder, wrist - elbow], axis=1))
    if min_sin_phi(poses) < MIN_SIN_PHI:
        raise DataError("trajectory passes too close to the coordinate pole")
    return Trajectory(t, poses, spec.motion_class, int(seed))


def make_windows(data, N=50, M=50, stride=10):
    """Sliding observation/prediction windows over a ``(T, d)`` array.

    Window ``i`` observes rows ``[i*stride, i*stride + N)`` and predicts the
    following ``M`` rows.
    """
    data = np.asarray(getattr(data, "poses", data), dtype=float)
    if data.shape[0] < N + M:
        raise TooShort(f"sequence of {data.shape[0]} frames is shorter than N+M={N + M}")
    count = (data.shape[0] - N - M) // stride + 1
    return [MotionWindow(data[i * stride:i * stride + N], data[i * stride + N:i * stride + N + M])
            for i in range(count)]


def window_starts(length, N=50, M=50, stride=10):
    if length < N + M:
        return []
    return [i * stride for i in range((length - N - M) // stride + 1)]


def split_sizes(n, fractions=(0.7, 0.15)):
    """Floor the train and validation shares; the test split takes the rest."""
    n_train = int(np.floor(n * fractions[0] + 1e-9))
    n_val = int(np.floor(n * fractions[1] + 1e-9))
    return n_train, n_val, n - n_train - n_val


def trajectory_seed(seed, class_index, j):
    return int(np.random.SeedSequence([int(seed), class_index, j]).generate_state(1)[0])


@dataclass
class DatasetBundle:
    """Trajectories per split plus the manifest describing them."""

    splits: dict = field(default_factory=lambda: {"train": [], "val": [], "test": []})
    manifest: dict = field(default_factory=dict)


def build_dataset(counts=None, anthro=None, seed=0, N=50, M=50, stride=10, T_s=T_S, specs=None):
    """Generate all trajectories and split them 70/15/15 per class by trajectory."""
    counts = dict(DEFAULT_COUNTS if counts is None else counts)
    anthro = anthro or Anthropometrics()
    bundle = DatasetBundle()
    entries = {"train": [], "val": [], "test": []}
    for ci, cls in enumerate(CLASSES):
        n = int(counts.get(cls, 0))
        if n < 1:
            continue
        spec = (specs or {}).get(cls) or default_spec(cls)
        trajs = []
        for j in range(n):
            s = trajectory_seed(seed, ci, j)
            for attempt in range(20):
                try:
                    traj = gen_trajectory(spec, anthro, s, T_s, min_length=N + M)
                    break
                except (Unreachable, DataError):
                    s = trajectory_seed(s, ci, attempt + 1)
            else:
                raise DataError(f"could not generate a valid trajectory for class {cls}")
            trajs.append((j, traj))
        order = np.random.default_rng(trajectory_seed(seed, ci, -1 % 2**31)).permutation(n)
        n_train, n_val, _ = split_sizes(n)
        parts = {"train": order[:n_train], "val": order[n_train:n_train + n_val],
                 "test": order[n_train + n_val:]}
        for split, idx in parts.items():
            for k in sorted(idx):
                j, traj = trajs[k]
                name = f"{cls}_{j:03d}.csv"
                bundle.splits[split].append(traj)
                entries[split].append({
                    "file": name,
                    "class": cls,
                    "seed": traj.seed,
                    "frames": len(traj),
                    "window_starts": window_starts(len(traj), N, M, stride),
                })
    bundle.manifest = {
        "format": "bvaukf-dataset",
        "version": 1,
        "seed": int(seed),
        "T_s": T_s,
        "N": N,
        "M": M,
        "stride": stride,
        "counts": {c: int(counts.get(c, 0)) for c in CLASSES},
        "splits": entries,
    }
    return bundle


# ---------------------------------------------------------------------------
# file I/O


def write_trajectory_csv(path, traj):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for t, row in zip(traj.t, traj.poses):
            fh.write(",".join(f"{v:.9g}" for v in (t, *row)) + "\n")


def read_trajectory_csv(path, motion_class="", seed=0):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise DataError(f"{path}: unexpected header {header}")
        rows = [[float(v) for v in r] for r in reader if r]
    if not rows:
        raise DataError(f"{path}: no frames")
    arr = np.asarray(rows)
    if arr.shape[1] != 7 or not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: malformed rows")
    return Trajectory(arr[:, 0], arr[:, 1:], motion_class, seed)


def write_dataset(bundle, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for split, trajs in bundle.splits.items():
        for traj, entry in zip(trajs, bundle.manifest["splits"][split]):
            write_trajectory_csv(os.path.join(out_dir, entry["file"]), traj)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(bundle.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(data_dir):
    path = os.path.join(data_dir, "manifest.json")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    bundle = DatasetBundle(manifest=manifest)
    for split in ("train", "val", "test"):
        for entry in manifest["splits"].get(split, []):
            bundle.splits[split].append(read_trajectory_csv(
                os.path.join(data_dir, entry["file"]), entry["class"], entry["seed"]))
    return bundle
