"""Per-trial probing state and the four selection/stopping policies.

Everything works on the ``theta = -log c`` scale: thresholds are ``+theta``
(confirm a target) and ``-theta`` (declare a cell normal), and the switching
cost enters only as ``s_ratio = s / c``.  Cells are numbered ``1..M`` in every
public object; ``ProbeState.S[m - 1]`` holds the sum LLR of cell ``m``.

Ties in any argmax/argmin resolve to the lowest cell index.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .observation import ObservationModel, divergences, llr


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class CostParams:
    theta: float
    s_ratio: float = 0.0

    def __post_init__(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise ConfigurationError(f"theta must be positive and finite, got {self.theta!r}")
        if not (self.s_ratio >= 0 and math.isfinite(self.s_ratio)):
            raise ConfigurationError(f"s_ratio must be finite and >= 0, got {self.s_ratio!r}")


class Case(enum.Enum):
    I = "I"
    II = "II"


class CaseDecision(NamedTuple):
    delta: float
    case: Case


class Probe(NamedTuple):
    cell: int


class Stop(NamedTuple):
    declared: int
    forced: bool = False  # stop taken outside the policy's own rule


PolicyDecision = Union[Probe, Stop]


@dataclass
class ProbeState:
    S: list[float]
    probes: list[int]
    n: int = 0
    last_action: int | None = None
    switches: int = 0

    @classmethod
    def fresh(cls, m_cells: int) -> "ProbeState":
        return cls(S=[0.0] * m_cells, probes=[0] * m_cells)

    @property
    def m_cells(self) -> int:
        return len(self.S)

    def record(self, cell: int, value: float) -> "ProbeState":
        """Attribute one LLR increment to ``cell`` (1-based), in place."""
        i = cell - 1
        self.S[i] += value
        self.probes[i] += 1
        self.n += 1
        if self.last_action is not None and self.last_action != cell:
            self.switches += 1
        self.last_action = cell
        return self


def update_state(state: ProbeState, cell: int, y: int, model: ObservationModel) -> ProbeState:
    """Fold observation ``y`` from ``cell`` into ``state`` (mutates and returns it)."""
    if not 1 <= cell <= state.m_cells:
        raise ValueError(f"cell {cell} outside 1..{state.m_cells}")
    return state.record(cell, llr(model, y))


# -- policy identities -------------------------------------------------------


@dataclass(frozen=True)
class PolicyKind:
    name: str
    p: float | None = field(default=None)

    _NAMES = ("dbs", "chernoff", "sluggish", "dgf")

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise ConfigurationError(f"unknown policy {self.name!r}; expected one of {self._NAMES}")
        if self.name == "sluggish":
            if self.p is None or not 0 < self.p <= 1:
                raise ConfigurationError(f"sluggish switching probability must be in (0, 1], got {self.p!r}")
        elif self.p is not None:
            raise ConfigurationError(f"policy {self.name!r} takes no parameter")

    @classmethod
    def parse(cls, text: str, p: float | None = None) -> "PolicyKind":
        """``'dbs'``, ``'chernoff'``, ``'dgf'``, ``'sluggish'`` or ``'sluggish:0.1'``."""
        name, _, arg = text.strip().lower().partition(":")
        if arg:
            p = float(arg)
        if name == "sluggish" and p is None:
            p = 0.1
        return cls(name, p)

    @property
    def label(self) -> str:
        if self.name == "sluggish":
            return f"Sluggish(p={self.p:g})"
        return {"dbs": "DBS", "chernoff": "Chernoff", "dgf": "DGF"}[self.name]


DBS = PolicyKind("dbs")
CHERNOFF = PolicyKind("chernoff")
DGF = PolicyKind("dgf")


def sluggish(p: float = 0.1) -> PolicyKind:
    return PolicyKind("sluggish", p)


# -- case criterion ----------------------------------------------------------


def _check_cells(m_cells: int) -> None:
    if m_cells < 2:
        raise ConfigurationError(f"need at least 2 cells, got {m_cells}")


def delta_offset(cost: CostParams, m_cells: int, d_gf: float, d_fg: float) -> float:
    """Switching-cost offset added to ``D(g||f)`` in the case criterion."""
    _check_cells(m_cells)
    if m_cells == 2 or cost.s_ratio == 0:
        return 0.0
    return cost.s_ratio * (m_cells - 2) * d_gf * d_fg / ((m_cells - 1) * cost.theta)


def select_case(cost: CostParams, m_cells: int, model: ObservationModel) -> CaseDecision:
    d_gf, d_fg = divergences(model)
    delta = delta_offset(cost, m_cells, d_gf, d_fg)
    case = Case.I if d_gf + delta >= d_fg / (m_cells - 1) else Case.II
    return CaseDecision(delta, case)


def case_crossover_theta(s_ratio: float, m_cells: int, model: ObservationModel) -> float:
    """Largest theta still in Case I.

    The offset decays like ``1/theta``, so Case I holds on ``(0, theta*]`` and
    Case II beyond.  Returns ``inf`` when Case I holds for every theta and
    ``0.0`` when it never does.
    """
    _check_cells(m_cells)
    d_gf, d_fg = divergences(model)
    gap = d_fg / (m_cells - 1) - d_gf
    if gap <= 0:
        return math.inf
    if m_cells == 2 or s_ratio == 0:
        return 0.0
    k = s_ratio * (m_cells - 2) * d_gf * d_fg / (m_cells - 1)
    return k / gap


def max_steps(m_cells: int, theta: float, d_gf: float, d_fg: float, factor: float = 20.0) -> int:
    """Safety cap on trial length; never below ``m_cells``."""
    cap = factor * (m_cells - 1) * theta / min(d_gf, d_fg)
    return max(m_cells, math.ceil(cap))


# -- selection rules ---------------------------------------------------------


def _argmax(S: Sequence[float]) -> int:
    return max(range(len(S)), key=S.__getitem__)


def _top_two(S: Sequence[float]) -> tuple[int, int]:
    """0-based indices of the largest and second-largest sums."""
    # single pass; strict comparisons keep the lowest index on ties
    b1, v1 = 0, S[0]
    b2, v2 = -1, -math.inf
    for i in range(1, len(S)):
        v = S[i]
        if v > v1:
            b2, v2 = b1, v1
            b1, v1 = i, v
        elif v > v2 or b2 < 0:
            b2, v2 = i, v
    return b1, b2


def b_set(state: ProbeState, cost: CostParams) -> set[int]:
    """Cells whose sum LLR is strictly below ``-theta``."""
    lo = -cost.theta
    return {i + 1 for i, s in enumerate(state.S) if s < lo}


def dbs_decide(state: ProbeState, case: CaseDecision, cost: CostParams) -> PolicyDecision:
    S = state.S
    theta = cost.theta
    if case.case is Case.I:
        m = _argmax(S)
        return Stop(m + 1) if S[m] > theta else Probe(m + 1)
    lo = -theta
    alive = [i for i, s in enumerate(S) if s >= lo]
    if len(alive) == 1:
        return Stop(alive[0] + 1)
    if not alive:
        # target's walk dipped below -theta too; terminate and flag
        return Stop(_argmax(S) + 1, forced=True)
    return Probe(min(alive, key=S.__getitem__) + 1)


def _gap_stop(S: Sequence[float], theta: float) -> tuple[int, bool]:
    first, second = _top_two(S)
    return first, S[first] - S[second] >= theta


def _draw(ml: int, m_cells: int, cum: Sequence[float], u: float) -> int:
    """Map a uniform draw onto a cell via the canonical (ML-first) vector.

    ``ml`` is the 0-based argmax; slot ``k >= 1`` is the k-th other cell in
    index order.
    """
    k = min(bisect_right(cum, u * cum[-1]), m_cells - 1)
    if k == 0:
        return ml + 1
    return k if k - 1 < ml else k + 1


def chernoff_lambda(model: ObservationModel, m_cells: int) -> tuple[float, ...]:
    """Maxmin action distribution in canonical order ``(ML cell, others...)``.

    The objective ``min_j lam_ml*D(g||f) + lam_j*D(f||g)`` is linear along the
    symmetric family, so the optimum is either all mass on the ML cell or an
    even spread over the others.  Equality resolves to the ML cell.
    """
    _check_cells(m_cells)
    d_gf, d_fg = divergences(model)
    if d_gf >= d_fg / (m_cells - 1):
        return (1.0,) + (0.0,) * (m_cells - 1)
    w = 1.0 / (m_cells - 1)
    return (0.0,) + (w,) * (m_cells - 1)


def chernoff_decide(
    state: ProbeState, cost: CostParams, lam: Sequence[float], rng: np.random.Generator
) -> PolicyDecision:
    first, stop = _gap_stop(state.S, cost.theta)
    if stop:
        return Stop(first + 1)
    cum = list(accumulate(lam))
    return Probe(_draw(first, state.m_cells, cum, rng.random()))


def sluggish_decide(
    state: ProbeState, cost: CostParams, lam: Sequence[float], p: float, rng: np.random.Generator
) -> PolicyDecision:
    first, stop = _gap_stop(state.S, cost.theta)
    if stop:
        return Stop(first + 1)
    if state.last_action is not None and rng.random() >= p:
        return Probe(state.last_action)
    cum = list(accumulate(lam))
    return Probe(_draw(first, state.m_cells, cum, rng.random()))


def dgf_decide(state: ProbeState, cost: CostParams) -> PolicyDecision:
    first, second = _top_two(state.S)
    if state.S[first] - state.S[second] >= cost.theta:
        return Stop(first + 1)
    return Probe(second + 1)


Decider = Callable[[ProbeState, np.random.Generator], PolicyDecision]


def make_decider(kind: PolicyKind, model: ObservationModel, m_cells: int, cost: CostParams) -> Decider:
    """Bind a policy to a model and cost so the harness can call ``decide(state, rng)``."""
    if kind.name == "dbs":
        case = select_case(cost, m_cells, model)
        return lambda state, rng: dbs_decide(state, case, cost)
    if kind.name == "dgf":
        return lambda state, rng: dgf_decide(state, cost)
    lam = chernoff_lambda(model, m_cells)
    if kind.name == "chernoff":
        return lambda state, rng: chernoff_decide(state, cost, lam, rng)
    p = kind.p
    return lambda state, rng: sluggish_decide(state, cost, lam, p, rng)
