"""Observation distributions for normal (f) and target (g) cells.

Two families are supported: Poisson rates, used by the reference experiments,
and finite discrete pmfs over ``{0, ..., K}``, which make exact brute-force
checks possible on tiny supports.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats


class InfiniteDivergenceError(ValueError):
    """Raised when a KL divergence is infinite (support mismatch)."""


class Family(enum.Enum):
    POISSON = "poisson"
    FINITE = "finite"


class Which(enum.Enum):
    F = "f"  # normal cell
    G = "g"  # target cell


class Direction(enum.Enum):
    F_TO_G = "f||g"
    G_TO_F = "g||f"


_PMF_TOL = 1e-12
_TAIL_MASS = 1e-12


@dataclass(frozen=True)
class ObservationModel:
    """Pair of count distributions ``(f, g)``.

    Build instances with :meth:`poisson` or :meth:`finite`; the constructor
    validates the invariants either way.
    """

    family: Family
    lambda_f: float | None = None
    lambda_g: float | None = None
    pmf_f: tuple[float, ...] | None = None
    pmf_g: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family is Family.POISSON:
            for name in ("lambda_f", "lambda_g"):
                rate = getattr(self, name)
                if rate is None or not math.isfinite(rate) or rate <= 0:
                    raise ValueError(f"{name} must be a positive finite rate, got {rate!r}")
            object.__setattr__(self, "lambda_f", float(self.lambda_f))
            object.__setattr__(self, "lambda_g", float(self.lambda_g))
        elif self.family is Family.FINITE:
            if self.pmf_f is None or self.pmf_g is None:
                raise ValueError("finite family needs both pmf_f and pmf_g")
            pf = tuple(float(p) for p in self.pmf_f)
            pg = tuple(float(p) for p in self.pmf_g)
            if len(pf) != len(pg):
                raise ValueError(f"pmf_f and pmf_g differ in support length ({len(pf)} vs {len(pg)})")
            for name, pmf in (("pmf_f", pf), ("pmf_g", pg)):
                if any(p < 0 or not math.isfinite(p) for p in pmf):
                    raise ValueError(f"{name} has negative or non-finite entries")
                if abs(math.fsum(pmf) - 1.0) > _PMF_TOL:
                    raise ValueError(f"{name} sums to {math.fsum(pmf)!r}, not 1")
            object.__setattr__(self, "pmf_f", pf)
            object.__setattr__(self, "pmf_g", pg)
        else:  # pragma: no cover
            raise ValueError(f"unknown family {self.family!r}")
        if kl(self, Direction.F_TO_G, allow_infinite=True) <= 0 or kl(
            self, Direction.G_TO_F, allow_infinite=True
        ) <= 0:
            raise ValueError("f and g must differ: both KL divergences have to be positive")

    @classmethod
    def poisson(cls, lambda_f: float, lambda_g: float) -> "ObservationModel":
        return cls(Family.POISSON, lambda_f=lambda_f, lambda_g=lambda_g)

    @classmethod
    def finite(cls, pmf_f: Sequence[float], pmf_g: Sequence[float]) -> "ObservationModel":
        return cls(Family.FINITE, pmf_f=tuple(pmf_f), pmf_g=tuple(pmf_g))

    @property
    def support_size(self) -> int | None:
        """Number of support points for finite models, ``None`` for Poisson."""
        return len(self.pmf_f) if self.family is Family.FINITE else None

    def rate(self, which: Which) -> float:
        return self.lambda_f if which is Which.F else self.lambda_g

    def pmf(self, which: Which) -> tuple[float, ...]:
        return self.pmf_f if which is Which.F else self.pmf_g

    def describe(self) -> str:
        if self.family is Family.POISSON:
            return f"Poisson(f={self.lambda_f:g}, g={self.lambda_g:g})"
        return f"Finite(f={list(self.pmf_f)}, g={list(self.pmf_g)})"


def _check_support(model: ObservationModel, y) -> None:
    arr = np.asarray(y)
    if np.any(arr < 0) or np.any(arr != np.floor(arr)):
        raise ValueError(f"observation must be a nonnegative integer, got {y!r}")
    if model.family is Family.FINITE and np.any(arr >= model.support_size):
        raise ValueError(f"observation {y!r} outside support {{0..{model.support_size - 1}}}")


def log_pmf(model: ObservationModel, which: Which, y):
    """Natural-log probability mass of ``y`` (scalar or array) under f or g.

    Zero-mass support points of a finite pmf give ``-inf``.
    """
    _check_support(model, y)
    if model.family is Family.POISSON:
        out = stats.poisson.logpmf(y, model.rate(which))
    else:
        with np.errstate(divide="ignore"):
            out = np.log(np.asarray(model.pmf(which)))[np.asarray(y, dtype=np.intp)]
    return float(out) if np.ndim(out) == 0 else out


def sample(model: ObservationModel, which: Which, rng: np.random.Generator) -> int:
    """Draw one observation from f or g."""
    return int(sample_n(model, which, rng, 1)[0])


def sample_n(model: ObservationModel, which: Which, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. observations as an int64 array."""
    if model.family is Family.POISSON:
        return rng.poisson(model.rate(which), size=n).astype(np.int64)
    pmf = model.pmf(which)
    return rng.choice(len(pmf), size=n, p=pmf).astype(np.int64)


def llr(model: ObservationModel, y):
    """Log-likelihood ratio ``log g(y) - log f(y)`` for scalar or array ``y``.

    Poisson uses the closed form ``y*log(lg/lf) + (lf - lg)``.  Finite models
    may return ``+inf``/``-inf`` where one pmf has zero mass.
    """
    _check_support(model, y)
    if model.family is Family.POISSON:
        lf, lg = model.lambda_f, model.lambda_g
        out = np.asarray(y, dtype=float) * math.log(lg / lf) + (lf - lg)
    else:
        table = llr_table(model)
        out = table[np.asarray(y, dtype=np.intp)]
    return float(out) if np.ndim(out) == 0 else out


def llr_table(model: ObservationModel) -> np.ndarray:
    """LLR for every support point of a finite model."""
    pf = np.asarray(model.pmf_f)
    pg = np.asarray(model.pmf_g)
    out = np.empty(len(pf))
    for y, (a, b) in enumerate(zip(pf, pg)):
        if a == 0 and b == 0:
            out[y] = 0.0  # unreachable point
        elif a == 0:
            out[y] = math.inf
        elif b == 0:
            out[y] = -math.inf
        else:
            out[y] = math.log(b) - math.log(a)
    return out


def kl(model: ObservationModel, direction: Direction, *, allow_infinite: bool = False) -> float:
    """KL divergence ``D(f||g)`` or ``D(g||f)`` in nats.

    Raises :class:`InfiniteDivergenceError` on a support mismatch unless
    ``allow_infinite`` is set, in which case ``inf`` is returned.
    """
    first, second = (Which.F, Which.G) if direction is Direction.F_TO_G else (Which.G, Which.F)
    if model.family is Family.POISSON:
        a, b = model.rate(first), model.rate(second)
        return a * math.log(a / b) + b - a
    p = model.pmf(first)
    q = model.pmf(second)
    total = []
    for pi, qi in zip(p, q):
        if pi == 0:
            continue
        if qi == 0:
            if allow_infinite:
                return math.inf
            raise InfiniteDivergenceError(
                f"D({direction.value}) is infinite: first distribution has mass where the second has none"
            )
        total.append(pi * (math.log(pi) - math.log(qi)))
    return math.fsum(total)


def truncated_support(model: ObservationModel) -> np.ndarray:
    """Support points carrying all but ``1e-12`` of the mass of both f and g."""
    if model.family is Family.FINITE:
        return np.arange(model.support_size)
    hi = max(
        int(stats.poisson.isf(_TAIL_MASS, model.lambda_f)),
        int(stats.poisson.isf(_TAIL_MASS, model.lambda_g)),
    )
    return np.arange(hi + 2)


def kl_by_summation(model: ObservationModel, direction: Direction) -> float:
    """Direct summation of ``p log(p/q)`` over the truncated support."""
    first, second = (Which.F, Which.G) if direction is Direction.F_TO_G else (Which.G, Which.F)
    ys = truncated_support(model)
    lp = np.asarray(log_pmf(model, first, ys), dtype=float)
    lq = np.asarray(log_pmf(model, second, ys), dtype=float)
    mask = np.isfinite(lp)
    if np.any(mask & ~np.isfinite(lq)):
        raise InfiniteDivergenceError(f"D({direction.value}) is infinite")
    return math.fsum(np.exp(lp[mask]) * (lp[mask] - lq[mask]))


def divergences(model: ObservationModel) -> tuple[float, float]:
    """``(D(g||f), D(f||g))``; infinite values are returned, not raised."""
    return (
        kl(model, Direction.G_TO_F, allow_infinite=True),
        kl(model, Direction.F_TO_G, allow_infinite=True),
    )
