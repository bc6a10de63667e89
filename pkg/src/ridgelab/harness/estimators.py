"""Empirical burn-in cost and regret-curve phase estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import beta

from ..errors import FitDegenerateError, InsufficientDataError

MIN_SUCCESSES = 5
MIN_SUCCESS_RATE = 0.6


def binomial_ci(k: int, n: int, level: float = 0.99):
    """Clopper-Pearson interval for k successes out of n."""
    if n == 0:
        return (0.0, 1.0)
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass
class BurninCost:
    median: float
    ci_low: float
    ci_high: float
    successes: int
    trials: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


def estimate_burnin_cost(records, n_boot: int = 2000, level: float = 0.90, seed: int = 0) -> BurninCost:
    """Median queries among successful runs, with a bootstrap CI.

    ``records`` are TrialRecord-like objects (``success``, ``queries``) for
    one dimension. Raises InsufficientDataError with fewer than 5 successes
    or a success rate below 60%.
    """
    records = list(records)
    q = np.array([r.queries for r in records if r.success], dtype=float)
    n = len(records)
    if len(q) < MIN_SUCCESSES:
        raise InsufficientDataError(f"only {len(q)} successful runs (need {MIN_SUCCESSES})")
    if len(q) / n < MIN_SUCCESS_RATE:
        raise InsufficientDataError(f"success rate {len(q) / n:.2f} below {MIN_SUCCESS_RATE}")
    rng = np.random.default_rng(seed)
    boots = np.median(q[rng.integers(0, len(q), size=(n_boot, len(q)))], axis=1)
    a = (1.0 - level) / 2
    lo, hi = np.quantile(boots, [a, 1 - a])
    return BurninCost(float(np.median(q)), float(lo), float(hi), len(q), n)


@dataclass
class PhaseReport:
    single_phase: bool
    plateau: float  # B in min(T, B + c*sqrt(T))
    sqrt_coef: float  # c
    knee1: Optional[float]
    knee2: Optional[float]
    sse: float


def _best_c(T, R, B, cs):
    # log-space residuals over a grid of c values
    lr = np.log(R)
    pred = np.minimum(T[None, :], B + cs[:, None] * np.sqrt(T)[None, :])
    sse = np.sum((np.log(pred) - lr[None, :]) ** 2, axis=1)
    k = int(np.argmin(sse))
    return float(cs[k]), float(sse[k])


def regret_phase_report(T: Sequence[float], R: Sequence[float], d: Optional[int] = None, n_knots: int = 200) -> PhaseReport:
    """Fit min(T, B + c sqrt(T)) to a regret curve by log-space least squares.

    Linear growth until T ~ B (knee1 = B), a plateau, then sqrt growth once
    c sqrt(T) is comparable to B (knee2 = (B/c)^2). B runs over log-spaced
    knots spanning the data; c over a log grid refined once around the best
    value. A curve that is best explained without a plateau inside the data
    range gets the single-phase verdict.
    """
    T = np.asarray(T, dtype=float)
    R = np.asarray(R, dtype=float)
    if len(T) < 5 or np.any(R <= 0) or np.any(T <= 0):
        raise FitDegenerateError("need at least 5 points with positive T and regret")
    order = np.argsort(T)
    T, R = T[order], R[order]
    lin_sse = float(np.sum((np.log(R) - np.log(T)) ** 2))
    Bs = np.geomspace(T[0] / 10, T[-1] * 10, n_knots)
    c_hi = max(float(np.max(R / np.sqrt(T))), 1.0) * 10
    best = (math.inf, None, None)
    for B in Bs:
        cs = np.concatenate([[0.0], np.geomspace(1e-6 * c_hi, c_hi, 160)])
        c, sse = _best_c(T, R, B, cs)
        if c > 0:
            fine = np.geomspace(c / 1.2, c * 1.2, 60)
            c2, sse2 = _best_c(T, R, B, fine)
            if sse2 < sse:
                c, sse = c2, sse2
        if sse < best[0]:
            best = (sse, B, c)
    sse, B, c = best
    B = float(B)
    if B >= T[-1] or lin_sse <= sse * (1 + 1e-9) + 1e-12:
        return PhaseReport(True, B, c, None, None, sse)
    knee2 = (B / c) ** 2 if c > 0 else math.inf
    return PhaseReport(False, B, c, B, knee2, sse)
