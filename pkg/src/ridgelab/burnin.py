"""Burn-in: iterative direction search for an action with <theta*, a0> >= 1/2.

Each epoch draws random directions orthogonal to the ones accepted so far
and certifies them with a hypothesis test. The first 100 epochs use the
plain test (query v, compare the mean reward to f on the target window).
Later epochs use the anchored test, which queries (lambda*v_pre +/- v)/sqrt(2)
so that the reward is read where f is steeper.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .env import QueryOracle, RidgeEnvironment
from .errors import BudgetExceeded, ParityMismatchError, PreconditionError
from .geometry import (
    ORTHO_TOL,
    DirectionBasis,
    anticoncentration_constant,
    combine_scaled,
    require_unit,
    sample_complement,
)
from .linkfn import EVEN, LinkFunction, gaht_epsilon, iaht_epsilon, recursive_progress

INITIAL_EPOCHS = 100
WINDOW_LO = 2.2
WINDOW_HI = 2.8
FEAS_GRID = 256
LOOP_CAP_FACTOR = 20.0


@dataclass
class HypTestVerdict:
    accepted: bool
    queries_used: int
    witness: Optional[Tuple[float, float]] = None
    residual: float = math.nan  # smallest achieved max-residual (anchored test)


@dataclass
class BurninResult:
    a0: Optional[np.ndarray]
    epochs_completed: int
    queries_used: int
    accepted_directions: DirectionBasis
    per_epoch_loops: List[int]
    failed: bool = False
    reason: str = ""
    c_hat: float = math.nan
    loop_budget: float = math.nan  # L in the per-call failure budget delta / L
    sign_test_queries: int = 0
    epoch_log: List[Tuple[int, int, int, float]] = field(default_factory=list)

    def write_epoch_log(self, path):
        """Columns: epoch, loops, queries, inner_product_of_partial_sum."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loops", "queries", "inner_product_of_partial_sum"])
            for row in self.epoch_log:
                w.writerow([row[0], row[1], row[2], repr(row[3])])


def _as_oracle(env) -> QueryOracle:
    return env.oracle() if isinstance(env, RidgeEnvironment) else env


def _check_delta(delta: float):
    if not 0.0 < delta < 0.5:
        raise PreconditionError("delta must lie in (0, 1/2)")


def query_count(delta: float, eps: float, arms: int = 1) -> int:
    """ceil(2 ln(2*arms/delta) / eps^2): per-action repetitions of a test."""
    return int(math.ceil(2.0 * math.log(2.0 * arms / delta) / eps ** 2))


def _window_hit(link: LinkFunction, r: float, lo: float, hi: float, eps: float) -> bool:
    """Is there x in [lo, hi] with |r - f(x)| <= eps?"""
    if link.kind != "piecewise":
        # continuous and monotone on the window: the image is an interval
        a, b = float(link.eval(lo)), float(link.eval(hi))
        return min(a, b) - eps <= r <= max(a, b) + eps
    xs = np.linspace(lo, hi, 4097)
    return bool(np.min(np.abs(r - link.eval(xs))) <= eps)


def initial_action_hyp_test(env, v: np.ndarray, delta: float) -> HypTestVerdict:
    """Certify <theta*, v> in [2.2, 2.8]/sqrt(d) against <theta*, v> outside [2, 3]/sqrt(d)."""
    oracle = _as_oracle(env)
    require_unit(v, "test direction", 1e-9)
    _check_delta(delta)
    d, link = oracle.d, oracle.link
    eps = iaht_epsilon(link, d)
    n = query_count(delta, eps)
    r = oracle.query_batch(v, n)
    s = math.sqrt(d)
    return HypTestVerdict(_window_hit(link, r, WINDOW_LO / s, WINDOW_HI / s, eps), n)


def anchored_actions(v_pre, v, lam):
    """The two probe actions (lam*v_pre -/+ v)/sqrt(2)."""
    r2 = 1.0 / math.sqrt(2.0)
    return combine_scaled(v_pre, v, lam * r2, -r2), combine_scaled(v_pre, v, lam * r2, r2)


def feasibility_search(link: LinkFunction, r_minus: float, r_plus: float, z_lo, z_hi, x_lo, x_hi, n: int = FEAS_GRID):
    """min over (z, x) of max(|r_- - f(z - x)|, |r_+ - f(z + x)|) with its argmin.

    Plain n-by-n grid over the box, then one n-by-n pass on the cell
    neighbourhood of the incumbent.
    """
    args = link.kernel_args
    zs = np.linspace(z_lo, z_hi, n)
    xg = np.linspace(x_lo, x_hi, n)
    best, i, j = kernels.feasibility_search(*args, r_minus, r_plus, zs, xg)
    zr = np.linspace(zs[max(i - 1, 0)], zs[min(i + 1, n - 1)], n)
    xr = np.linspace(xg[max(j - 1, 0)], xg[min(j + 1, n - 1)], n)
    best_r, ir, jr = kernels.feasibility_search(*args, r_minus, r_plus, zr, xr)
    if best_r < best:
        return float(best_r), float(zr[ir]), float(xr[jr])
    return float(best), float(zs[i]), float(xg[j])


def good_action_hyp_test(env, v: np.ndarray, delta: float, v_pre: np.ndarray, x_pre: float) -> HypTestVerdict:
    """Anchored test: uses a direction v_pre with <theta*, v_pre> in [x_pre, 1.5 x_pre]."""
    oracle = _as_oracle(env)
    require_unit(v, "test direction", 1e-9)
    require_unit(v_pre, "anchor direction", 1e-9)
    _check_delta(delta)
    if abs(float(np.dot(v, v_pre))) > ORTHO_TOL:
        raise PreconditionError("test direction must be orthogonal to the anchor")
    d, link = oracle.d, oracle.link
    eps, y_star = gaht_epsilon(link, d, float(x_pre))
    lam = math.sqrt(2.0) * y_star / x_pre
    if not -1e-12 <= lam <= 1.0 + 1e-12:
        raise AssertionError(f"anchor weight {lam} outside [0, 1]")
    lam = min(max(lam, 0.0), 1.0)
    a_minus, a_plus = anchored_actions(v_pre, v, lam)
    n = query_count(delta, eps, arms=2)
    r_minus = oracle.query_batch(a_minus, n)
    r_plus = oracle.query_batch(a_plus, n)
    s2 = math.sqrt(2.0 * d)
    res, z, x = feasibility_search(link, r_minus, r_plus, y_star, 1.5 * y_star, WINDOW_LO / s2, WINDOW_HI / s2)
    ok = res <= eps
    return HypTestVerdict(ok, 2 * n, (z, x) if ok else None, res)


def sign_test(env, v: np.ndarray, v1: np.ndarray, delta: float) -> Tuple[np.ndarray, int]:
    """Even links: return +v or -v so that its inner product shares the sign of v1's."""
    oracle = _as_oracle(env)
    eps = iaht_epsilon(oracle.link, oracle.d)
    n = query_count(delta, eps, arms=2)
    r2 = 1.0 / math.sqrt(2.0)
    r_plus = oracle.query_batch(combine_scaled(v, v1, r2, r2), n)
    r_minus = oracle.query_batch(combine_scaled(v, v1, r2, -r2), n)
    return (v if r_plus >= r_minus else -v), 2 * n


def _loop_budget(d: int, m: int, delta: float, c_hat: Optional[float]):
    c = anticoncentration_constant(d, m) if c_hat is None else float(c_hat)
    c_used = 0.5 * c  # halved measured constant: a smaller c only enlarges L
    L = 2.0 * m * math.log(2.0 * m / delta) / c_used
    cap = int(math.ceil(LOOP_CAP_FACTOR * math.log(2.0 * m / delta) / c_used))
    return c, L, cap


def _search(env, delta, budget, rng, c_hat, even: bool) -> BurninResult:
    oracle = _as_oracle(env)
    diag = env if isinstance(env, RidgeEnvironment) else None
    _check_delta(delta)
    d = oracle.d
    m = math.ceil(d / 16)
    rng = rng if rng is not None else np.random.default_rng()
    c, L, cap = _loop_budget(d, m, delta, c_hat)
    call_delta = delta / L
    basis = DirectionBasis(d, capacity=m)
    loops: List[int] = []
    start = oracle.queries_used
    used = 0
    sign_q = 0
    log: List[Tuple[int, int, int, float]] = []

    def result(failed: bool, reason: str = "") -> BurninResult:
        k = len(basis)
        a0 = basis.mean_direction() if k else None
        if a0 is not None:
            a0 = a0 / np.linalg.norm(a0)
        total = oracle.queries_used - start
        if total != used:
            raise AssertionError(f"query tally {used} disagrees with the ledger {total}")
        return BurninResult(a0, k, total, basis, loops, failed, reason, c, L, sign_q, log)

    for i in range(1, m + 1):
        recursive = i > INITIAL_EPOCHS
        if recursive:
            v_pre = basis.mean_direction(i - 1)
            v_pre = v_pre / np.linalg.norm(v_pre)
            x_pre = recursive_progress(i, d)
        count = 0
        while True:
            if count >= cap:
                loops.append(count)
                return result(True, f"loop cap {cap} hit in epoch {i}")
            count += 1
            v = sample_complement(rng, basis)
            try:
                if budget is not None:
                    eps = gaht_epsilon(oracle.link, d, x_pre)[0] if recursive else iaht_epsilon(oracle.link, d)
                    if used + query_count(call_delta, eps, 2 if recursive else 1) * (2 if recursive else 1) > budget:
                        loops.append(count)
                        return result(True, "query budget exhausted")
                if recursive:
                    verdict = good_action_hyp_test(oracle, v, call_delta, v_pre, x_pre)
                else:
                    verdict = initial_action_hyp_test(oracle, v, call_delta)
                used += verdict.queries_used
                if not verdict.accepted:
                    continue
                if even and i >= 2:
                    v, q = sign_test(oracle, v, basis.vectors[0], call_delta)
                    used += q
                    sign_q += q
            except BudgetExceeded:
                used = oracle.queries_used - start
                loops.append(count)
                return result(True, "environment query budget exhausted")
            basis.add(v)
            break
        loops.append(count)
        if diag is not None:
            partial = basis.mean_direction()
            log.append((i, count, oracle.queries_used - start, diag.inner(partial / np.linalg.norm(partial))))
    return result(False)


def run_burnin(env, delta: float, budget: Optional[int] = None, rng=None, c_hat: Optional[float] = None) -> BurninResult:
    """Find a0 with <theta*, a0> >= 1/2 for a monotone link.

    ``env`` may be a RidgeEnvironment (its per-epoch diagnostics are then
    logged from the ground truth) or a bare QueryOracle. ``c_hat`` overrides
    the measured anti-concentration constant.
    """
    return _search(env, delta, budget, rng, c_hat, even=False)


def run_burnin_even(env, delta: float, budget: Optional[int] = None, rng=None, c_hat: Optional[float] = None) -> BurninResult:
    """Even-link variant: guarantees |<theta*, a0>| >= 1/2."""
    link = _as_oracle(env).link
    if link.parity != EVEN:
        raise ParityMismatchError(f"link {link.label} is not even")
    return _search(env, delta, budget, rng, c_hat, even=True)
