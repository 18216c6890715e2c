"""Compare DBS against the Chernoff, Sluggish and DGF baselines.

A small sweep on the second setting; raise TRIALS for tighter intervals.
Run: python3 demos/03_policy_comparison.py
"""

import dataclasses
from pathlib import Path

from dbslab.config import parse_config
from dbslab.harness import run_sweep

TRIALS = 200

config = parse_config(Path(__file__).resolve().parents[1] / "experiments" / "exp2.toml")
config = dataclasses.replace(config, theta_grid=(100.0, 250.0), trials_per_hypothesis=TRIALS)
table = run_sweep(config)

print(f"{'policy':<16} {'theta':>6} {'case':>4} {'P_e':>7} {'E[tau]':>8} {'switch':>7} {'rel loss':>9}")
for row in table:
    r = row.risk
    print(
        f"{row.policy.label:<16} {row.theta:6.0f} {row.case.value:>4} {r.pe_hat:7.4f} "
        f"{r.mean_tau:8.2f} {r.switch_ratio:7.3f} {r.relative_loss:9.3f}"
    )
