"""
Training and evaluating a small model pair
==========================================

The full experiment trains on several hundred trajectories.  This script
runs the same steps on a few dozen so it finishes in seconds; the numbers
it prints are a smoke test, not a benchmark.  Models trained this briefly
forecast forces poorly, and the filtered estimate is usually worse than
the pose forecast alone.
"""

import numpy as np

from bvaukf.config import from_dict
from bvaukf.datagen import build_dataset
from bvaukf.evaluation import compare_report, select_test_windows
from bvaukf.pipeline import training_windows
from bvaukf.seqmodel import train

# the same settings the command line would read from a JSON file
run = from_dict({"data": {"counts": {"A": 8, "B": 8, "C": 8}},
                 "train": {"epochs": 40, "hidden_dim": 16},
                 "eval": {"windows_per_class": 3, "K": 5}})
arm = run.anthropometrics
bundle = build_dataset(run.data.counts, arm, seed=run.seed)
print({split: len(trajs) for split, trajs in bundle.splits.items()})

# two models over the same windows: poses, and forces recovered from them
models = {}
for kind in ("pose", "force"):
    cfg = run.train_config(kind)
    windows = training_windows(bundle.splits["train"], kind, arm)
    val = training_windows(bundle.splits["val"], kind, arm)
    models[kind] = train(windows, cfg, kind, val)
    print(f"{kind}: {len(windows)} windows, final train loss {models[kind].history['train'][-1]:.4f}")

seed = run.derived_seed("eval")
test = select_test_windows(bundle.splits["test"], run.eval.windows_per_class, seed)
report = compare_report(test, models["pose"], models["force"], run.ukf, arm, run.eval.K, seed)
for row in report.rows:
    print(f"{row['class']} {row['joint']:5s}  AERP {row['aerp']:7.2f}%  "
          f"improved {row['improved_fraction']:.2f} of {row['n_windows']}")
print("mean wrist difference (mm):",
      np.round([1000 * w["mean_diff"]["wrist"] for w in report.windows], 2))
