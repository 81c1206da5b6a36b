"""Error metrics and the baseline-versus-filtered comparison."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .datagen import CLASSES, make_windows
from .errors import LengthMismatch
from .kinematics import joint_positions
from .pipeline import refine
from .uq import pass_seeds

JOINTS = ("elbow", "wrist")
MIN_BASELINE_ERROR = 1e-9


def position_errors(pred_poses, true_poses, anthro):
    """Per-step Euclidean elbow and wrist errors (m)."""
    pred_poses = np.asarray(pred_poses, dtype=float)
    true_poses = np.asarray(true_poses, dtype=float)
    if pred_poses.shape != true_poses.shape:
        raise LengthMismatch(f"{pred_poses.shape} vs {true_poses.shape}")
    pe, pw = joint_positions(pred_poses, anthro)
    te, tw = joint_positions(true_poses, anthro)
    return np.linalg.norm(pe - te, axis=-1), np.linalg.norm(pw - tw, axis=-1)


def reduction_metrics(err_bv, err_aukf, min_error=MIN_BASELINE_ERROR):
    """Average and average-maximum error reduction, in percent.

    ``err_bv`` and ``err_aukf`` are ``(samples, steps)``.  The per-step
    reduction is ``(err_bv - err_aukf) / err_bv``; steps whose baseline error
    is below ``min_error`` are skipped.  AERP pools every remaining
    (sample, step) pair; AMERP averages each sample's largest reduction.

    Returns
    -------
    dict with keys ``aerp``, ``amerp``, ``excluded``
    """
    err_bv = np.atleast_2d(np.asarray(err_bv, dtype=float))
    err_aukf = np.atleast_2d(np.asarray(err_aukf, dtype=float))
    if err_bv.shape != err_aukf.shape:
        raise LengthMismatch(f"{err_bv.shape} vs {err_aukf.shape}")
    valid = err_bv >= min_error
    r = np.where(valid, (err_bv - err_aukf) / np.where(valid, err_bv, 1.0), np.nan)
    has_any = valid.any(axis=1)
    aerp = 100.0 * float(np.nanmean(r)) if valid.any() else 0.0
    amerp = 100.0 * float(np.mean(np.nanmax(r[has_any], axis=1))) if has_any.any() else 0.0
    return {"aerp": aerp, "amerp": amerp, "excluded": int((~valid).sum())}


def select_test_windows(trajectories, per_class=40, seed=0, N=50, M=50, stride=10):
    """Randomly pick up to ``per_class`` windows of each class.

    Returns
    -------
    list of dict
        Keys ``class``, ``trajectory`` (index into ``trajectories``),
        ``start``, ``observed``, ``future``; ordered by class then selection.
    """
    rng = np.random.default_rng(seed)
    out = []
    for cls in CLASSES:
        pool = []
        for ti, traj in enumerate(trajectories):
            if traj.motion_class != cls or len(traj) < N + M:
                continue
            for wi, w in enumerate(make_windows(traj.poses, N, M, stride)):
                pool.append((ti, wi * stride, w))
        if not pool:
            continue
        chosen = rng.choice(len(pool), size=min(per_class, len(pool)), replace=False)
        for k in chosen:
            ti, start, w = pool[k]
            out.append({"class": cls, "trajectory": ti, "start": start,
                        "observed": w.observed, "future": w.future})
    return out


@dataclass
class Report:
    """Table-style summary plus per-step error curves."""

    rows: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    windows: list = field(default_factory=list)

    def to_json(self):
        return json.dumps({"summary": self.rows, "windows": self.windows}, indent=2, sort_keys=True) + "\n"

    def write_json(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    def write_curves(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class", "window", "joint", "step", "err_bv", "err_aukf", "diff"])
            for row in self.curves:
                w.writerow([row[0], row[1], row[2], row[3]] + [f"{v:.9g}" for v in row[4:]])

    def row(self, cls, joint):
        for r in self.rows:
            if r["class"] == cls and r["joint"] == joint:
                return r
        raise KeyError((cls, joint))


def compare_report(windows, model_a, model_b, cfg, anthro, K=10, seed=0, refine_fn=refine):
    """Score the baseline (MC-dropout mean) against the filtered prediction.

    Parameters
    ----------
    windows : list of dict
        As returned by :func:`select_test_windows`.
    refine_fn : callable
        Replacement for :func:`bvaukf.pipeline.refine`, same signature.

    Returns
    -------
    Report
        One summary row per (class, joint) with AERP, AMERP, the number of
        excluded steps and the fraction of windows whose mean error
        difference (baseline minus filtered) is positive.
    """
    seeds = pass_seeds(seed, len(windows))
    errors = {}
    report = Report()
    for idx, (win, s) in enumerate(zip(windows, seeds)):
        result = refine_fn(model_a, model_b, win["observed"], cfg, anthro, K, s)
        bv = position_errors(result.measurement, win["future"], anthro)
        fused = position_errors(result.poses, win["future"], anthro)
        diffs = {}
        for j, joint in enumerate(JOINTS):
            errors.setdefault((win["class"], joint), []).append((bv[j], fused[j]))
            d = bv[j] - fused[j]
            diffs[joint] = float(np.mean(d))
            for step in range(d.shape[0]):
                report.curves.append((win["class"], idx, joint, step + 1,
                                      float(bv[j][step]), float(fused[j][step]), float(d[step])))
        report.windows.append({"index": idx, "class": win["class"], "trajectory": win["trajectory"],
                               "start": win["start"], "mean_diff": diffs})
    for cls in CLASSES:
        for joint in JOINTS:
            pairs = errors.get((cls, joint), [])
            if not pairs:
                report.rows.append({"class": cls, "joint": joint, "n_windows": 0, "aerp": 0.0,
                                    "amerp": 0.0, "excluded": 0, "improved_fraction": 0.0})
                continue
            e_bv = np.array([p[0] for p in pairs])
            e_f = np.array([p[1] for p in pairs])
            m = reduction_metrics(e_bv, e_f)
            improved = float(np.mean(np.mean(e_bv - e_f, axis=1) > 0))
            report.rows.append({"class": cls, "joint": joint, "n_windows": len(pairs),
                                "improved_fraction": improved, **m})
    return report
