"""Step through one DBS trial and watch the elimination set grow.

Run: python3 demos/02_single_trial_trace.py
"""

from pathlib import Path

from dbslab.config import parse_config
from dbslab.harness import run_trial
from dbslab.policies import DBS

config = parse_config(Path(__file__).resolve().parents[1] / "experiments" / "exp2.toml")
theta, true_cell = 200.0, 3

trace = []
result = run_trial(config, DBS, theta, true_cell, seed=7, trace=trace)

print(" n cell  y      S (rounded)                     |B| switched")
for step in trace:
    sums = " ".join(f"{s:8.1f}" for s in step.S)
    print(f"{step.n:2d}  {step.cell}  {step.y:2d}  {sums}   {step.b_size}  {'*' if step.switched else ''}")
print(result)
