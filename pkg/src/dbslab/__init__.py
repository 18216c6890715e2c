"""Active anomaly detection with switching cost: the deterministic bounded
switching (DBS) policy, three baseline policies and a Monte Carlo harness."""

from .bounds import (
    AsymptoticBound,
    CellType,
    RiskBreakdown,
    chernoff_lambda_grid,
    estimate_risk,
    i_star,
    r_lb_scaled,
    relative_loss,
    sprt_monte_carlo,
    sprt_oracle,
)
from .harness import ExperimentConfig, TrialResult, derive_seed, run_sweep, run_trial
from .observation import Direction, Family, ObservationModel, Which, kl, llr, log_pmf, sample
from .policies import (
    CHERNOFF,
    DBS,
    DGF,
    Case,
    CaseDecision,
    CostParams,
    PolicyKind,
    Probe,
    ProbeState,
    Stop,
    b_set,
    chernoff_decide,
    chernoff_lambda,
    dbs_decide,
    delta_offset,
    dgf_decide,
    select_case,
    sluggish,
    sluggish_decide,
    update_state,
)

__version__ = "0.1.0"
