"""Independent checks: Wald's approximation and a grid search for Chernoff weights.

Run: python3 demos/04_oracles.py
"""

import numpy as np

from dbslab.bounds import CellType, chernoff_lambda_grid, sprt_monte_carlo, sprt_oracle
from dbslab.observation import ObservationModel
from dbslab.policies import chernoff_lambda

model = ObservationModel.poisson(10.0, 1.0)
rng = np.random.default_rng(0)
for theta in (10.0, 100.0):
    for which in CellType:
        wald = sprt_oracle(model, theta, which)
        mc = sprt_monte_carlo(model, theta, which, n_runs=20_000, rng=rng)
        print(f"theta={theta:5.0f} {which.name:<6} Wald {wald:7.3f}  simulated {mc:7.3f}")

for lf, lg in ((10.0, 1.0), (2.0, 0.001)):
    m = ObservationModel.poisson(lf, lg)
    print(f"lambda_f={lf}, lambda_g={lg}")
    print("  closed form:", chernoff_lambda(m, 5))
    print("  grid search:", chernoff_lambda_grid(m, 5))
