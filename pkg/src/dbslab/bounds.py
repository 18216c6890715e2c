"""Asymptotic bounds, Monte Carlo risk estimation and SPRT/maxmin oracles.

All risks are reported divided by the observation cost ``c``:

    risk_scaled = P_e * e^theta + E[tau] + s_ratio * E[tau_s]

so that large ``theta`` never needs ``c`` itself.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np

from .observation import ObservationModel, Which, divergences, llr, sample_n

Z95 = NormalDist().inv_cdf(0.975)


def i_star(model: ObservationModel, m_cells: int) -> float:
    """Effective information rate: ``D(g||f)`` or ``D(f||g)/(M-1)``, whichever
    branch the offset-free case criterion picks."""
    d_gf, d_fg = divergences(model)
    per_normal = d_fg / (m_cells - 1)
    return d_gf if d_gf >= per_normal else per_normal


def r_lb_scaled(theta: float, i_star: float) -> float:
    """Asymptotic lower bound ``-c log c / I*`` divided by ``c``."""
    if theta < 0 or i_star <= 0:
        raise ValueError("theta must be >= 0 and i_star > 0")
    return theta / i_star


def relative_loss(risk_scaled: float, r_lb_scaled: float) -> float:
    if r_lb_scaled <= 0:
        raise ValueError("r_lb_scaled must be positive")
    return (risk_scaled - r_lb_scaled) / r_lb_scaled


@dataclass(frozen=True)
class AsymptoticBound:
    i_star: float
    r_lb_scaled: float

    @classmethod
    def for_model(cls, model: ObservationModel, m_cells: int, theta: float) -> "AsymptoticBound":
        rate = i_star(model, m_cells)
        return cls(rate, r_lb_scaled(theta, rate))


@dataclass(frozen=True)
class RiskBreakdown:
    """Monte Carlo estimate of the scaled Bayes risk and its parts.

    Every ``*_ci95`` field is the half-width of a normal-approximation 95%
    interval.
    """

    n_trials: int
    pe_hat: float
    pe_ci95: float
    mean_tau: float
    tau_ci95: float
    mean_tau_s: float
    tau_s_ci95: float
    switch_ratio: float
    switch_ratio_ci95: float
    risk_scaled: float
    risk_ci95: float
    relative_loss: float | None
    truncated_fraction: float

    @property
    def pe_interval(self) -> tuple[float, float]:
        return max(0.0, self.pe_hat - self.pe_ci95), min(1.0, self.pe_hat + self.pe_ci95)


class EstimationError(ValueError):
    pass


def _stratum_moments(err: np.ndarray, tau: np.ndarray, tau_s: np.ndarray):
    """Mean vector and sample covariance of ``(error, tau, tau_s)``.

    Built from exact integer sums, so the result does not depend on the
    order of the trials.
    """
    X = np.stack([err, tau, tau_s]).astype(np.int64)
    n = X.shape[1]
    sums = [int(v) for v in X.sum(axis=1)]
    cross = [[int(v) for v in row] for row in X @ X.T]
    mean = np.array([s / n for s in sums])
    cov = np.zeros((3, 3))
    if n > 1:
        for i in range(3):
            for j in range(3):
                # exact integer numerator before the single float division
                cov[i, j] = (n * cross[i][j] - sums[i] * sums[j]) / (n * (n - 1))
    return n, mean, cov


def estimate_risk_arrays(
    true_cell: np.ndarray,
    correct: np.ndarray,
    tau: np.ndarray,
    tau_s: np.ndarray,
    truncated: np.ndarray,
    theta: float,
    s_ratio: float,
    *,
    priors: Sequence[float] | None = None,
    r_lb_scaled: float | None = None,
) -> RiskBreakdown:
    """Array form of :func:`estimate_risk`."""
    true_cell = np.asarray(true_cell)
    if true_cell.size == 0:
        raise EstimationError("no trials to estimate from")
    err = ~np.asarray(correct, dtype=bool)
    tau = np.asarray(tau)
    tau_s = np.asarray(tau_s)
    truncated = np.asarray(truncated, dtype=bool)

    cells = np.unique(true_cell)
    if priors is None:
        weights = np.array([np.count_nonzero(true_cell == m) for m in cells], dtype=float)
    else:
        weights = np.array([priors[m - 1] for m in cells], dtype=float)
        if weights.sum() <= 0:
            raise EstimationError("priors give zero weight to every observed hypothesis")
    weights = weights / weights.sum()

    mean = np.zeros(3)
    cov_of_mean = np.zeros((3, 3))
    trunc = 0.0
    for w, m in zip(weights, cells):
        sel = true_cell == m
        n, mu, cov = _stratum_moments(err[sel], tau[sel], tau_s[sel])
        mean += w * mu
        cov_of_mean += (w * w / n) * cov
        trunc += w * np.count_nonzero(truncated[sel]) / n

    pe, m_tau, m_tau_s = (float(v) for v in mean)
    base = m_tau + s_ratio * m_tau_s
    if pe > 0:
        risk = math.exp(theta + math.log(pe)) + base if theta + math.log(pe) < 709 else math.inf
    else:
        risk = base

    if pe > 0 and cov_of_mean[0, 0] > 0:
        a = np.array([math.exp(theta) if theta < 709 else math.inf, 1.0, s_ratio])
        with np.errstate(over="ignore", invalid="ignore"):
            var_risk = float(a @ cov_of_mean @ a)
    else:
        a = np.array([1.0, s_ratio])
        var_risk = float(a @ cov_of_mean[1:, 1:] @ a)

    if m_tau > 0:
        ratio = m_tau_s / m_tau
        b = np.array([0.0, -ratio / m_tau, 1.0 / m_tau])
        ratio_hw = Z95 * math.sqrt(max(float(b @ cov_of_mean @ b), 0.0))
    else:
        ratio, ratio_hw = 0.0, 0.0

    def hw(v: float) -> float:
        return Z95 * math.sqrt(max(v, 0.0)) if math.isfinite(v) else math.inf

    return RiskBreakdown(
        n_trials=int(true_cell.size),
        pe_hat=pe,
        pe_ci95=hw(cov_of_mean[0, 0]),
        mean_tau=m_tau,
        tau_ci95=hw(cov_of_mean[1, 1]),
        mean_tau_s=m_tau_s,
        tau_s_ci95=hw(cov_of_mean[2, 2]),
        switch_ratio=ratio,
        switch_ratio_ci95=ratio_hw,
        risk_scaled=risk,
        risk_ci95=hw(var_risk),
        relative_loss=None if r_lb_scaled is None else relative_loss(risk, r_lb_scaled),
        truncated_fraction=float(trunc),
    )


def estimate_risk(
    trials: Iterable,
    theta: float,
    s_ratio: float,
    *,
    priors: Sequence[float] | None = None,
    r_lb_scaled: float | None = None,
) -> RiskBreakdown:
    """Estimate the scaled Bayes risk from trial records.

    Trials are grouped by true cell and the per-hypothesis means are combined
    with ``priors`` (default: weights proportional to the trial counts, i.e.
    the pooled mean).
    """
    trials = list(trials)
    if not trials:
        raise EstimationError("no trials to estimate from")
    return estimate_risk_arrays(
        np.array([t.true_cell for t in trials]),
        np.array([t.correct for t in trials]),
        np.array([t.tau for t in trials]),
        np.array([t.tau_s for t in trials]),
        np.array([t.truncated for t in trials]),
        theta,
        s_ratio,
        priors=priors,
        r_lb_scaled=r_lb_scaled,
    )


# -- oracles -----------------------------------------------------------------


class CellType(enum.Enum):
    TARGET = "target"
    NORMAL = "normal"


def sprt_oracle(model: ObservationModel, theta: float, which: CellType) -> float:
    """Wald's expected sample size for a single cell with boundaries ``+-theta``."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    d_gf, d_fg = divergences(model)
    return theta / (d_gf if which is CellType.TARGET else d_fg)


def sprt_monte_carlo(
    model: ObservationModel,
    theta: float,
    which: CellType,
    n_runs: int = 100_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Empirical mean stopping time of ``n_runs`` single-cell SPRTs.

    A run stops at the first step where its sum LLR leaves ``[-theta, theta]``.
    """
    rng = np.random.default_rng() if rng is None else rng
    dist = Which.G if which is CellType.TARGET else Which.F
    S = np.zeros(n_runs)
    steps = np.zeros(n_runs, dtype=np.int64)
    active = np.arange(n_runs)
    while active.size:
        S[active] += llr(model, sample_n(model, dist, rng, active.size))
        steps[active] += 1
        out = np.abs(S[active]) > theta
        active = active[~out]
    return float(steps.mean())


def chernoff_lambda_grid(model: ObservationModel, m_cells: int, step: float = 1e-3) -> tuple[float, ...]:
    """Brute-force maxmin over ``(a, (1-a)/(M-1), ...)`` on a grid of ``a``.

    Evaluates ``min_j a*D(g||f) + lam_j*D(f||g)`` for each grid point and keeps
    the maximiser with the largest ``a`` (ties go to the ML cell).  Returned in canonical (ML-first) order.
    """
    d_gf, d_fg = divergences(model)
    n = int(round(1 / step))
    best_a, best_val = 0.0, -math.inf
    for k in range(n, -1, -1):
        a = k / n
        vec = [a] + [(1 - a) / (m_cells - 1)] * (m_cells - 1)
        val = min(vec[0] * d_gf + vec[j] * d_fg for j in range(1, m_cells))
        if val > best_val + 1e-12:
            best_a, best_val = a, val
    return (best_a,) + ((1 - best_a) / (m_cells - 1),) * (m_cells - 1)
