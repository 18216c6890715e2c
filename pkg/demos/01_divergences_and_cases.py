"""Divergences of the two Poisson settings and where DBS changes strategy.

Run: python3 demos/01_divergences_and_cases.py
"""

from dbslab.observation import ObservationModel, divergences
from dbslab.policies import CostParams, case_crossover_theta, select_case

SETTINGS = {"exp1": (10.0, 1.0), "exp2": (2.0, 0.001)}
M, S_RATIO = 5, 10.0

for name, (lf, lg) in SETTINGS.items():
    model = ObservationModel.poisson(lf, lg)
    d_gf, d_fg = divergences(model)
    print(f"{name}: lambda_f={lf}, lambda_g={lg}")
    print(f"  D(g||f) = {d_gf:.4f}   D(f||g)/(M-1) = {d_fg / (M - 1):.4f}")
    crossover = case_crossover_theta(S_RATIO, M, model)
    print(f"  Case I up to theta = {crossover:.4f}")
    for theta in (50, 150, 151, 300):
        decision = select_case(CostParams(theta, S_RATIO), M, model)
        print(f"    theta={theta:>3}: delta={decision.delta:.4f} -> Case {decision.case.value}")
