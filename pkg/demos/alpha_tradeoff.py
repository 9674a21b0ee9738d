"""Tune the subpopulation size for several mixture weights, then validate.

One holdout split, one shared set of cross-validated predictions for all
weights, and a short bootstrap on the holdout for each chosen proportion.

    python3 demos/alpha_tradeoff.py [n] [B]
"""

import sys
import warnings
from dataclasses import replace

from ppm import (
    SimulationConfig,
    SplitPlan,
    TuningConfig,
    ValidationConfig,
    external_validate,
    generate_dataset,
    split_holdout,
    tune_alphas,
)

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
B = int(sys.argv[2]) if len(sys.argv) > 2 else 50

ds = generate_dataset(SimulationConfig(n=n, seed=1))
trte, holdout = split_holdout(ds, SplitPlan(holdout_fraction=0.2, K=5, v=2, seed=1))

cfg = TuningConfig(m_grid=(0.1, 0.2, 0.3, 0.5, 0.75, 1.0), K=5, v=2, seed=1)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    results = tune_alphas(trte, cfg, (0.3, 0.5, 0.75, 0.99))

for alpha, r in results.items():
    curve = " ".join(f"{pt.mean_loss:.4f}" for pt in r.loss_curve)
    print(f"alpha {alpha:4.2f}: p_optimal {r.p_optimal:.3f} (M={r.optimal_m})  loss {curve}")

# The point is the mean over replicates; the BCa interval is anchored on the
# single un-resampled holdout run ("ref"). On small holdouts the two can differ
# enough that the mean falls outside its interval.
print(f"\nholdout of {holdout.n} patients, B={B}")
base = ValidationConfig(B=B, seed=1)
for p_opt in sorted({r.p_optimal for r in results.values()}):
    rep = external_validate(holdout, replace(base, p_optimal=p_opt))
    parts = []
    for name in ("auroc", "citl_mean", "calibration_slope", "ici"):
        m = rep.measures[name]
        parts.append(f"{name} {m.point:.3f} ref {m.reference:.3f} [{m.lower:.3f}, {m.upper:.3f}]")
    print(f"p {p_opt:.3f}:\n  " + "\n  ".join(parts))
