"""Reproducible Monte Carlo trials and sweeps over (policy, theta).

Every trial owns its random streams, seeded from
``derive_seed(master_seed, policy_index, theta_index, hypothesis, trial_index)``,
so trials can run in any order or in parallel with identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bounds import AsymptoticBound, RiskBreakdown, estimate_risk_arrays
from .observation import ObservationModel, Which, divergences, llr, sample_n
from .policies import (
    Case,
    ConfigurationError,
    CostParams,
    Decider,
    PolicyKind,
    ProbeState,
    Stop,
    make_decider,
    max_steps,
    select_case,
)

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# observations drawn per refill of a cell's buffer
_CHUNK = 64


@dataclass(frozen=True)
class ExperimentConfig:
    m_cells: int
    model: ObservationModel
    theta_grid: tuple[float, ...]
    s_ratio: float
    policies: tuple[PolicyKind, ...]
    trials_per_hypothesis: int
    master_seed: int = 0
    priors: tuple[float, ...] | None = None
    max_steps_factor: float = 20.0

    def __post_init__(self):
        if not isinstance(self.m_cells, int) or self.m_cells < 2:
            raise ConfigurationError(f"m_cells must be an integer >= 2, got {self.m_cells!r}")
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        object.__setattr__(self, "policies", tuple(self.policies))
        if any(not (t > 0 and math.isfinite(t)) for t in self.theta_grid):
            raise ConfigurationError("theta_grid entries must be positive and finite")
        if not (self.s_ratio >= 0 and math.isfinite(self.s_ratio)):
            raise ConfigurationError(f"s_ratio must be finite and >= 0, got {self.s_ratio!r}")
        if self.trials_per_hypothesis < 1:
            raise ConfigurationError("trials_per_hypothesis must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must fit in an unsigned 64-bit integer")
        if not self.max_steps_factor > 0:
            raise ConfigurationError("max_steps_factor must be positive")
        if self.priors is None:
            object.__setattr__(self, "priors", (1.0 / self.m_cells,) * self.m_cells)
        else:
            pri = tuple(float(p) for p in self.priors)
            if len(pri) != self.m_cells:
                raise ConfigurationError(f"priors has length {len(pri)}, expected {self.m_cells}")
            if any(p < 0 for p in pri) or abs(math.fsum(pri) - 1.0) > 1e-12:
                raise ConfigurationError(f"priors must be nonnegative and sum to 1, got sum {math.fsum(pri)!r}")
            object.__setattr__(self, "priors", pri)


class TrialResult(NamedTuple):
    true_cell: int
    declared: int
    tau: int
    tau_s: int
    correct: bool
    truncated: bool


class TraceStep(NamedTuple):
    n: int
    cell: int
    y: int
    llr: float
    S: tuple[float, ...]
    switched: bool
    b_size: int  # |B| when the cell was selected


def _splitmix64(x):
    with np.errstate(over="ignore"):
        z = (x + _GOLDEN) & _MASK
        z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK
        z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK
        return z ^ (z >> np.uint64(31))


def derive_seed(master_seed: int, policy_index: int, theta_index: int, hypothesis: int, trial_index):
    """64-bit trial seed: SplitMix64 folded over the five inputs.

    ``h = mix(master); h = mix(h ^ x)`` for each remaining input.  Each step is
    a bijection of 64-bit words, so inputs differing only in the last
    coordinate never collide.  ``trial_index`` may be an integer array, in
    which case an array of seeds is returned.
    """
    parts = (policy_index, theta_index, hypothesis)
    if master_seed < 0 or any(p < 0 for p in parts) or np.any(np.asarray(trial_index) < 0):
        raise ValueError("seed inputs must be nonnegative")
    h = _splitmix64(np.uint64(master_seed))
    for v in parts:
        h = _splitmix64(h ^ np.uint64(v))
    h = _splitmix64(h ^ np.asarray(trial_index, dtype=np.uint64))
    return int(h) if np.ndim(h) == 0 else h


class _Sampler:
    """Per-cell observation buffers; cell ``true_cell`` draws from g."""

    def __init__(self, model: ObservationModel, m_cells: int, true_cell: int, rng: np.random.Generator):
        self.model = model
        self.true_cell = true_cell
        self.rng = rng
        self.y: list[list[int]] = [[] for _ in range(m_cells)]
        self.l: list[list[float]] = [[] for _ in range(m_cells)]
        self.pos = [0] * m_cells

    def draw(self, cell: int) -> tuple[int, float]:
        i = cell - 1
        k = self.pos[i]
        if k == len(self.y[i]):
            which = Which.G if cell == self.true_cell else Which.F
            ys = sample_n(self.model, which, self.rng, _CHUNK)
            self.y[i] = ys.tolist()
            self.l[i] = np.asarray(llr(self.model, ys), dtype=float).tolist()
            k = 0
        self.pos[i] = k + 1
        return self.y[i][k], self.l[i][k]


def _simulate(
    model: ObservationModel,
    m_cells: int,
    decide: Decider,
    cap: int,
    true_cell: int,
    seed: int,
    theta: float,
    trace: list | None = None,
) -> TrialResult:
    obs_seq, act_seq = np.random.SeedSequence(seed).spawn(2)
    sampler = _Sampler(model, m_cells, true_cell, np.random.default_rng(obs_seq))
    act_rng = np.random.default_rng(act_seq)
    state = ProbeState.fresh(m_cells)
    while True:
        decision = decide(state, act_rng)
        if isinstance(decision, Stop):
            break
        if state.n >= cap:
            S = state.S
            decision = Stop(max(range(m_cells), key=S.__getitem__) + 1, forced=True)
            break
        cell = decision.cell
        y, value = sampler.draw(cell)
        if trace is not None:
            b_size = sum(s < -theta for s in state.S)
            switched = state.last_action is not None and state.last_action != cell
        state.record(cell, value)
        if trace is not None:
            trace.append(TraceStep(state.n, cell, y, value, tuple(state.S), switched, b_size))
    declared = decision.declared
    return TrialResult(
        true_cell=true_cell,
        declared=declared,
        tau=state.n,
        tau_s=state.switches,
        correct=declared == true_cell,
        truncated=decision.forced,
    )


def _cap(config: ExperimentConfig, theta: float) -> int:
    d_gf, d_fg = divergences(config.model)
    return max_steps(config.m_cells, theta, d_gf, d_fg, config.max_steps_factor)


def run_trial(
    config: ExperimentConfig,
    policy: PolicyKind,
    theta: float,
    true_cell: int,
    seed: int,
    trace: list | None = None,
) -> TrialResult:
    """Run one trial under hypothesis ``true_cell``.

    Pass a list as ``trace`` to collect one :class:`TraceStep` per probe.
    """
    if not 1 <= true_cell <= config.m_cells:
        raise ValueError(f"true_cell {true_cell} outside 1..{config.m_cells}")
    cost = CostParams(theta, config.s_ratio)
    decide = make_decider(policy, config.model, config.m_cells, cost)
    return _simulate(config.model, config.m_cells, decide, _cap(config, theta), true_cell, seed, theta, trace)


@dataclass(frozen=True)
class SweepRow:
    policy: PolicyKind
    theta: float
    case: Case
    trials: int
    risk: RiskBreakdown
    bound: AsymptoticBound


@dataclass
class SweepTable:
    config: ExperimentConfig
    rows: list[SweepRow] = field(default_factory=list)

    def get(self, policy: PolicyKind | str, theta: float) -> SweepRow:
        name = policy if isinstance(policy, str) else policy.name
        for row in self.rows:
            if row.policy.name == name and row.theta == float(theta):
                return row
        raise KeyError((name, theta))

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def _run_unit(args) -> tuple[tuple[int, int, int], np.ndarray]:
    """Run every trial of one (policy, theta, hypothesis) stratum.

    Returns an ``(n, 4)`` int array of ``declared, tau, tau_s, truncated``.
    """
    config, pi, ti, cell = args
    policy = config.policies[pi]
    theta = config.theta_grid[ti]
    cost = CostParams(theta, config.s_ratio)
    decide = make_decider(policy, config.model, config.m_cells, cost)
    cap = _cap(config, theta)
    seeds = derive_seed(config.master_seed, pi, ti, cell, np.arange(config.trials_per_hypothesis))
    out = np.empty((config.trials_per_hypothesis, 4), dtype=np.int64)
    for k, seed in enumerate(seeds.tolist()):
        r = _simulate(config.model, config.m_cells, decide, cap, cell, seed, theta)
        out[k] = (r.declared, r.tau, r.tau_s, r.truncated)
    return (pi, ti, cell), out


def run_sweep(config: ExperimentConfig, workers: int = 1) -> SweepTable:
    """Run the full stratified sweep and summarise each (policy, theta).

    Rows come out in roster order, then theta-grid order.  ``workers > 1``
    farms strata out to a process pool; the table is identical either way.
    """
    units = [
        (config, pi, ti, cell)
        for pi in range(len(config.policies))
        for ti in range(len(config.theta_grid))
        for cell in range(1, config.m_cells + 1)
    ]
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_unit, units))
    else:
        results = dict(map(_run_unit, units))

    table = SweepTable(config)
    n = config.trials_per_hypothesis
    for pi, policy in enumerate(config.policies):
        for ti, theta in enumerate(config.theta_grid):
            blocks = [results[(pi, ti, cell)] for cell in range(1, config.m_cells + 1)]
            data = np.concatenate(blocks)
            true_cell = np.repeat(np.arange(1, config.m_cells + 1), n)
            bound = AsymptoticBound.for_model(config.model, config.m_cells, theta)
            risk = estimate_risk_arrays(
                true_cell,
                data[:, 0] == true_cell,
                data[:, 1],
                data[:, 2],
                data[:, 3].astype(bool),
                theta,
                config.s_ratio,
                priors=config.priors,
                r_lb_scaled=bound.r_lb_scaled,
            )
            case = select_case(CostParams(theta, config.s_ratio), config.m_cells, config.model).case
            table.rows.append(SweepRow(policy, theta, case, len(data), risk, bound))
    return table


def collect_trials(config: ExperimentConfig, policy: PolicyKind, theta: float, policy_index: int = 0,
                   theta_index: int = 0) -> list[TrialResult]:
    """All stratified trials for one (policy, theta), as records."""
    cost = CostParams(theta, config.s_ratio)
    decide = make_decider(policy, config.model, config.m_cells, cost)
    cap = _cap(config, theta)
    out = []
    for cell in range(1, config.m_cells + 1):
        seeds = derive_seed(config.master_seed, policy_index, theta_index, cell,
                            np.arange(config.trials_per_hypothesis))
        out.extend(_simulate(config.model, config.m_cells, decide, cap, cell, s, theta) for s in seeds.tolist())
    return out
