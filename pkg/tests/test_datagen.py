import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvaukf.datagen import (
    CLASSES,
    CSV_HEADER,
    MIN_SIN_PHI,
    Trajectory,
    build_dataset,
    default_spec,
    elbow_from_wrist,
    gen_trajectory,
    load_dataset,
    make_windows,
    min_jerk,
    read_trajectory_csv,
    split_sizes,
    window_starts,
    write_dataset,
    write_trajectory_csv,
)
from bvaukf.errors import DataError, TooShort, Unreachable
from bvaukf.kinematics import joint_positions


def test_min_jerk_midpoint():
    p0, p1 = np.array([0.0, 1.0, 2.0]), np.array([1.0, 3.0, -2.0])
    np.testing.assert_allclose(min_jerk(p0, p1, 0.5), (p0 + p1) / 2, atol=1e-15)
    np.testing.assert_array_equal(min_jerk(p0, p1, 0.0), p0)
    np.testing.assert_array_equal(min_jerk(p0, p1, 1.0), p1)


@pytest.mark.parametrize("tau", [0.0, 1.0])
def test_min_jerk_rests_at_ends(tau):
    p0, p1 = np.zeros(3), np.ones(3)
    h = 1e-4
    # one-sided stencils so the clamp outside [0, 1] does not interfere
    s = 1.0 if tau == 0.0 else -1.0
    f = [min_jerk(p0, p1, tau + s * k * h)[0] for k in range(4)]
    vel = s * (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    acc = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
    # stencil truncation error is about h^2 * 60 / 3
    assert abs(vel) < 1e-6 and abs(acc) < 1e-2


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 0.5), st.floats(-np.pi, np.pi), st.floats(-1.5, 1.5))
def test_inverse_kinematics_segment_lengths(dist, azimuth, swivel):
    from bvaukf.kinematics import Anthropometrics
    a = Anthropometrics()
    wrist = dist * np.array([np.cos(azimuth), np.sin(azimuth), -0.3])
    wrist *= dist / np.linalg.norm(wrist)
    elbow = elbow_from_wrist(wrist[None], np.array([swivel]), a)[0]
    assert np.linalg.norm(elbow - a.shoulder) == pytest.approx(a.l_a, abs=1e-12)
    assert np.linalg.norm(wrist - elbow) == pytest.approx(a.l_b, abs=1e-12)


def test_swivel_zero_puts_elbow_lowest(anthro):
    wrist = np.array([[0.4, 0.0, 0.0]])
    angles = np.linspace(-1, 1, 21)
    z = [elbow_from_wrist(wrist, np.array([s]), anthro)[0, 2] for s in angles]
    assert int(np.argmin(z)) == 10


@pytest.mark.parametrize("wrist", [[0.6, 0.0, 0.0], [0.01, 0.0, 0.0], [0.0, 0.0, -0.4]])
def test_unreachable(wrist, anthro):
    with pytest.raises(Unreachable):
        elbow_from_wrist(np.array([wrist]), np.zeros(1), anthro)


@pytest.mark.parametrize("cls", CLASSES)
def test_generated_trajectory_invariants(cls, anthro):
    traj = gen_trajectory(default_spec(cls), anthro, seed=3)
    np.testing.assert_allclose(np.diff(traj.t), 0.04, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(traj.poses.reshape(-1, 2, 3), axis=-1), 1.0, atol=1e-12)
    assert np.min(np.hypot(traj.poses[:, [0, 3]], traj.poses[:, [1, 4]])) >= MIN_SIN_PHI
    again = gen_trajectory(default_spec(cls), anthro, seed=3)
    np.testing.assert_array_equal(traj.poses, again.poses)
    assert len(traj) >= 100


def test_classes_reach_different_places(anthro):
    far = {}
    for cls in CLASSES:
        _, wrist = joint_positions(gen_trajectory(default_spec(cls), anthro, seed=0).poses, anthro)
        far[cls] = wrist[np.argmax(np.linalg.norm(wrist - wrist[0], axis=1))]
    assert far["B"][1] > far["A"][1] + 0.1


def test_min_length_extends(anthro):
    traj = gen_trajectory(default_spec("A"), anthro, seed=1, min_length=400)
    assert len(traj) == 400


def test_unknown_class():
    with pytest.raises(DataError):
        default_spec("D")


@pytest.mark.parametrize("length, stride, count", [(100, 7, 1), (110, 10, 2), (149, 10, 5)])
def test_make_windows_counts(length, stride, count):
    data = np.arange(length * 2.0).reshape(length, 2)
    wins = make_windows(data, 50, 50, stride)
    assert len(wins) == count
    for i, w in enumerate(wins):
        np.testing.assert_array_equal(w.observed[0], data[i * stride])
        np.testing.assert_array_equal(w.future[0], data[i * stride + 50])
    assert window_starts(length, 50, 50, stride) == [i * stride for i in range(count)]


def test_make_windows_too_short():
    with pytest.raises(TooShort):
        make_windows(np.zeros((99, 6)))
    assert window_starts(99) == []


@pytest.mark.parametrize("n, expected", [(132, (92, 19, 21)), (144, (100, 21, 23)),
                                         (152, (106, 22, 24)), (1, (0, 0, 1))])
def test_split_sizes(n, expected):
    assert split_sizes(n) == expected


@pytest.fixture(scope="module")
def small_bundle():
    return build_dataset({"A": 7, "B": 3, "C": 0}, seed=5)


def test_build_dataset_partition(small_bundle):
    m = small_bundle.manifest
    files = [e["file"] for s in ("train", "val", "test") for e in m["splits"][s]]
    assert len(files) == len(set(files)) == 10
    per_split = {s: sum(e["class"] == "A" for e in m["splits"][s]) for s in m["splits"]}
    assert (per_split["train"], per_split["val"], per_split["test"]) == split_sizes(7)
    assert m["counts"] == {"A": 7, "B": 3, "C": 0}


def test_build_dataset_same_seed_same_manifest(small_bundle):
    again = build_dataset({"A": 7, "B": 3, "C": 0}, seed=5)
    assert json.dumps(again.manifest, sort_keys=True) == json.dumps(small_bundle.manifest, sort_keys=True)
    other = build_dataset({"A": 7, "B": 3, "C": 0}, seed=6)
    assert other.manifest["splits"] != small_bundle.manifest["splits"]


def test_trajectory_csv_round_trip(tmp_path, anthro):
    traj = gen_trajectory(default_spec("C"), anthro, seed=2)
    path = tmp_path / "c.csv"
    write_trajectory_csv(path, traj)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == len(traj) + 1
    back = read_trajectory_csv(path, "C", 2)
    np.testing.assert_allclose(back.poses, traj.poses, rtol=1e-8, atol=1e-9)
    assert back.motion_class == "C"


@pytest.mark.parametrize("text", ["a,b\n1,2\n", ",".join(CSV_HEADER) + "\n",
                                  ",".join(CSV_HEADER) + "\n0,1,2\n",
                                  ",".join(CSV_HEADER) + "\n0,1,0,0,1,0,nan\n"])
def test_bad_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataError):
        read_trajectory_csv(path)


def test_dataset_round_trip(tmp_path, small_bundle):
    write_dataset(small_bundle, tmp_path)
    back = load_dataset(tmp_path)
    assert back.manifest == json.loads(json.dumps(small_bundle.manifest))
    for split in ("train", "val", "test"):
        for a, b in zip(small_bundle.splits[split], back.splits[split]):
            assert isinstance(b, Trajectory) and a.motion_class == b.motion_class
            np.testing.assert_allclose(a.poses, b.poses, atol=1e-9)


def test_load_dataset_missing(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path)
