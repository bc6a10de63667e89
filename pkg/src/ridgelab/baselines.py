"""Competitors that stall on ridge bandits.

- Eluder-UCB over a least-squares confidence set, with an optimistic
  random-boundary tie-break or the adversarial packing tie-break.
- Learners driven by regression oracles that return adversarial but
  budget-respecting estimates (all zeros, or fresh uniform directions).
- A nonadaptive learner that fixes all its actions before seeing a reward.

The adversarial tie-breaker reads theta* from the environment. It is not a
learner: it is the worst-case choice among equally optimistic actions, and
the harness hands it theta* explicitly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import brentq

from .env import RidgeEnvironment
from .errors import EmptyConfidenceSetError
from .geometry import sample_sphere
from .learning import History, constrained_least_squares
from .linkfn import LinkFunction

KAPPA = 4.0
PACKING_C = 16.0
BISECT_STEPS = 40


def est_budget(d: int, t: int, kappa: float = KAPPA) -> float:
    """Est_t = kappa * d * ln(e * t)."""
    return kappa * d * math.log(math.e * max(t, 1))


def packing_threshold(d: int, T0: int, c: float = PACKING_C) -> float:
    return math.sqrt(c * math.log(T0) / d)


# least squares on the sphere ----------------------------------------------

def sphere_ls_linear(V: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """argmin over unit theta of theta' V theta - 2 b' theta (identity-link least squares).

    Solved through the secular equation ||(V - mu I)^{-1} b|| = 1 with
    mu < lambda_min(V). Returns None when there is no data.
    """
    if not np.any(b) and not np.any(V):
        return None
    lam, Q = np.linalg.eigh(V)
    beta = Q.T @ b
    lmin = lam[0]

    def norm_minus_one(mu):
        return float(np.sqrt(np.sum((beta / (lam - mu)) ** 2)) - 1.0)

    scale = max(np.linalg.norm(b), 1e-300)
    # eigenvalues tied with lambda_min (up to rounding) form the bottom eigenspace
    bottom = lam - lmin <= 1e-12 * max(1.0, abs(lam[-1]))
    gap = np.where(bottom, 1.0, lam - lmin)
    rest = np.where(bottom, 0.0, beta / gap)
    if np.linalg.norm(beta[bottom]) < 1e-12 * scale and float(rest @ rest) <= 1.0:
        # hard case: the secular function never reaches 1 left of lambda_min;
        # fill the bottom eigenspace to reach unit norm
        y = rest.copy()
        y[0] = math.sqrt(max(1.0 - float(y @ y), 0.0))
        th = Q @ y
        return th / np.linalg.norm(th)
    hi = lmin - 1e-14 * max(1.0, abs(lmin))
    lo = lmin - scale - 1.0
    while norm_minus_one(lo) > 0:
        lo = lmin - 2.0 * (lmin - lo)
    if norm_minus_one(hi) < 0:
        mu = hi
    else:
        mu = brentq(norm_minus_one, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    th = Q @ (beta / (lam - mu))
    return th / np.linalg.norm(th)


# confidence set ------------------------------------------------------------

class ConfidenceSet:
    """{theta : sum_s (f(<a_s, theta>) - f(<a_s, center>))^2 <= est_budget}.

    For the identity link the sum is a quadratic form in (theta - center)
    and only the Gram matrix is kept.
    """

    def __init__(self, d: int, link: LinkFunction, kappa: float = KAPPA, refit_interval: Optional[int] = None, rng=None):
        self.d = d
        self.link = link
        self.kappa = kappa
        self.linear = link.kind == "identity"
        self.refit_interval = refit_interval
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.n = 0
        self._A = np.zeros((64, d))
        self._r = np.zeros(64)
        self.V = np.zeros((d, d))
        self.b = np.zeros(d)
        self._center: Optional[np.ndarray] = None
        self._fitted_at = -1

    # data ----------------------------------------------------------------
    def add(self, a: np.ndarray, r: float):
        if self.n == self._A.shape[0]:
            self._A = np.vstack([self._A, np.zeros_like(self._A)])
            self._r = np.concatenate([self._r, np.zeros_like(self._r)])
        self._A[self.n] = a
        self._r[self.n] = r
        self.n += 1
        if self.linear:
            self.V += np.outer(a, a)
            self.b += r * a

    @property
    def actions(self) -> np.ndarray:
        return self._A[: self.n]

    @property
    def rewards(self) -> np.ndarray:
        return self._r[: self.n]

    @property
    def est_budget(self) -> float:
        return est_budget(self.d, self.n + 1, self.kappa)

    # center ----------------------------------------------------------------
    def _due(self) -> bool:
        if self._center is None or self._fitted_at < 0:
            return True
        if self.refit_interval is None:
            return self._fitted_at != self.n
        return self.n <= 2 * self.d or self.n - self._fitted_at >= self.refit_interval

    @property
    def center(self) -> Optional[np.ndarray]:
        """Unconstrained-sphere least-squares fit, refreshed per the refit policy."""
        if self.n == 0:
            return None
        if self._due():
            if self.linear:
                c = sphere_ls_linear(self.V, self.b)
            else:
                hist = History(self.actions.copy(), np.ones(self.n), self.rewards.copy())
                c = constrained_least_squares(hist, self.link, None, restarts=2, rng=self.rng, warm_start=self._center)
            self._center = c
            self._fitted_at = self.n
        return self._center

    # membership ----------------------------------------------------------
    def residual(self, theta: np.ndarray, ref: Optional[np.ndarray] = None) -> float:
        """sum_s (f(<a_s, theta>) - f(<a_s, ref>))^2, ref defaulting to the center."""
        if self.n == 0:
            return 0.0
        ref = self.center if ref is None else ref
        if self.linear:
            e = np.asarray(theta) - ref
            return float(e @ self.V @ e)
        A = self.actions
        diff = self.link.eval(np.clip(A @ theta, -1, 1)) - self.link.eval(np.clip(A @ ref, -1, 1))
        return float(diff @ diff)

    def contains(self, theta: np.ndarray, budget: Optional[float] = None, ref: Optional[np.ndarray] = None) -> bool:
        return self.residual(theta, ref) <= (self.est_budget if budget is None else budget)

    def geodesic_profile(self, c: np.ndarray, w: np.ndarray) -> Callable[[float], float]:
        """s -> residual of cos(s) c + sin(s) w, with per-call cost O(1) (linear) or O(n)."""
        if self.linear:
            cc, cw, ww = float(c @ self.V @ c), float(c @ self.V @ w), float(w @ self.V @ w)

            def q(s):
                a, b = math.cos(s) - 1.0, math.sin(s)
                return a * a * cc + 2 * a * b * cw + b * b * ww

            return q
        P, Qw = self.actions @ c, self.actions @ w
        fP = self.link.eval(np.clip(P, -1, 1))

        def q(s):
            x = np.clip(math.cos(s) * P + math.sin(s) * Qw, -1, 1)
            diff = self.link.eval(x) - fP
            return float(diff @ diff)

        return q

    def optimistic_member(self, rng) -> np.ndarray:
        """A member on the boundary toward a random direction (or the direction itself)."""
        u = sample_sphere(rng, self.d)
        c = self.center
        if c is None:
            return u
        budget = self.est_budget
        w = u - float(u @ c) * c
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            return c.copy()
        w /= nw
        s_max = math.acos(max(-1.0, min(1.0, float(u @ c))))
        q = self.geodesic_profile(c, w)
        if q(0.0) > budget:
            raise EmptyConfidenceSetError("center fails its own membership test")
        if q(s_max) <= budget:
            lo = s_max
        else:
            lo, hi = 0.0, s_max
            for _ in range(BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                if q(mid) <= budget:
                    lo = mid
                else:
                    hi = mid
        th = math.cos(lo) * c + math.sin(lo) * w
        return th / np.linalg.norm(th)


# packing ---------------------------------------------------------------------

class PackingSet:
    """theta_0 = theta* followed by T0 unit vectors, pairwise |<.,.>| <= threshold."""

    def __init__(self, points: np.ndarray, threshold: float, draws: int):
        self.points = points
        self.threshold = threshold
        self.draws = draws

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def build(cls, rng, d: int, T0: int, theta_star: np.ndarray, c: float = PACKING_C, block: int = 512, max_draw_factor: float = 10.0):
        thr = packing_threshold(d, T0, c)
        pts = np.empty((T0 + 1, d))
        pts[0] = theta_star
        k = 1
        draws = 0
        limit = int(max_draw_factor * (T0 + 1))
        while k < T0 + 1:
            if draws >= limit:
                raise RuntimeError(f"packing rejection sampling exceeded {limit} draws")
            B = rng.standard_normal((block, d))
            B /= np.linalg.norm(B, axis=1, keepdims=True)
            draws += block
            ok = np.max(np.abs(B @ pts[:k].T), axis=1) <= thr
            cand = B[ok]
            G = np.abs(cand @ cand.T)
            chosen: List[int] = []
            for i in range(cand.shape[0]):
                if k + len(chosen) >= T0 + 1:
                    break
                if not chosen or np.max(G[i, chosen]) <= thr:
                    chosen.append(i)
            pts[k : k + len(chosen)] = cand[chosen]
            k += len(chosen)
        return cls(pts, thr, draws)

    def max_pairwise(self, block: int = 2048) -> float:
        P = self.points
        worst = 0.0
        for i in range(0, len(P), block):
            G = np.abs(P[i : i + block] @ P.T)
            for r in range(G.shape[0]):
                G[r, i + r] = 0.0
            worst = max(worst, float(G.max()))
        return worst


# tie-breaking rules -----------------------------------------------------------

class OptimisticSearch:
    name = "optimistic_search"

    def choose(self, cset: ConfidenceSet, rng) -> np.ndarray:
        return cset.optimistic_member(rng)


class AdversarialPacking:
    """Plays unused packing points while they stay in the theta*-centred set."""

    name = "adversarial_packing"

    def __init__(self, packing: PackingSet, theta_star: np.ndarray):
        self.packing = packing
        self.theta_star = np.asarray(theta_star, dtype=float)
        self.next = 1
        self.packing_steps = 0
        self.fallback_steps = 0

    def choose(self, cset: ConfidenceSet, rng) -> np.ndarray:
        if self.next < len(self.packing):
            cand = self.packing.points[self.next]
            if cset.contains(cand, ref=self.theta_star):
                self.next += 1
                self.packing_steps += 1
                return cand.copy()
        self.fallback_steps += 1
        return cset.optimistic_member(rng)


def eluder_ucb_step(env, cset: ConfidenceSet, tie_break, rng) -> np.ndarray:
    """Choose one optimistic action, query it and record the observation."""
    oracle = env.oracle() if isinstance(env, RidgeEnvironment) else env
    a = tie_break.choose(cset, rng)
    r = oracle.query(a)
    cset.add(a, r)
    return a


# summaries -------------------------------------------------------------------

@dataclass
class BaselineSummary:
    algorithm: str
    d: int
    T: int
    seed: Optional[int]
    max_inner_product: float
    final_inner_product: float
    cum_regret: float
    queries: int
    residual: float = math.nan  # oracle residual (regression-oracle learners)
    est_budget: float = math.nan
    theta_hat: Optional[np.ndarray] = None

    def row(self):
        return [self.algorithm, self.d, self.T, self.seed, repr(self.max_inner_product), repr(self.final_inner_product), repr(self.cum_regret), self.queries]


SUMMARY_COLUMNS = ["algorithm", "d", "T", "seed", "max_inner_product", "final_inner_product", "cum_regret", "queries"]


def write_summary_csv(rows: List[BaselineSummary], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for s in rows:
            w.writerow(s.row())


def _summary(env: RidgeEnvironment, name, T, q0, r0, last_inner, seed=None, **kw) -> BaselineSummary:
    return BaselineSummary(
        name, env.d, T, seed, env.ledger.max_inner_product, last_inner,
        env.ledger.cumulative_regret - r0, env.ledger.queries - q0, **kw,
    )


def run_eluder_ucb(
    env: RidgeEnvironment,
    T: int,
    tie_break=None,
    rng=None,
    kappa: float = KAPPA,
    refit_interval: Optional[int] = None,
    seed: Optional[int] = None,
    stop_when: Optional[Callable[[np.ndarray], bool]] = None,
) -> BaselineSummary:
    """T rounds of Eluder-UCB; ``tie_break`` defaults to OptimisticSearch.

    ``stop_when(action)`` is a harness-side early exit (it may look at theta*);
    the summary's T is then the number of rounds actually played.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    rng = rng if rng is not None else np.random.default_rng()
    tie_break = tie_break if tie_break is not None else OptimisticSearch()
    cset = ConfidenceSet(env.d, env.link, kappa, refit_interval, rng)
    q0, r0 = env.ledger.queries, env.ledger.cumulative_regret
    oracle = env.oracle()
    a = None
    played = 0
    for _ in range(T):
        a = eluder_ucb_step(oracle, cset, tie_break, rng)
        played += 1
        if stop_when is not None and stop_when(a):
            break
    return _summary(env, f"eluder_ucb[{tie_break.name}]", played, q0, r0, env.inner(a), seed)


# regression oracles -------------------------------------------------------------

class ZeroOnlineOracle:
    """Online oracle whose estimate, issued before each round, is always 0."""

    name = "zero"
    online = True

    def __init__(self, d: int):
        self.d = d

    def estimate(self, t, actions, rewards) -> np.ndarray:
        return zero_online_oracle(t, None, self.d)


def zero_online_oracle(t: int, history, d: Optional[int] = None) -> np.ndarray:
    """The all-zero estimate, whatever the history."""
    if d is None:
        d = len(history[0][0]) if history else 0
    return np.zeros(d)


def random_offline_oracle(rng, t: int, history, d: int) -> np.ndarray:
    """A fresh uniform direction, independent of the history."""
    return sample_sphere(rng, d)


class RandomOfflineOracle:
    """Offline oracle: after each round it reports a fresh uniform direction."""

    name = "random"
    online = False

    def __init__(self, d: int, rng):
        self.d = d
        self.rng = rng

    def estimate(self, t, actions, rewards) -> np.ndarray:
        return random_offline_oracle(self.rng, t, None, self.d)


class LeastSquaresOracle:
    """Genuine online oracle: sphere least squares on the rewards seen so far."""

    name = "least_squares"
    online = True

    def __init__(self, d: int, link: LinkFunction, rng):
        self.cset = ConfidenceSet(d, link, rng=rng)
        self.d = d
        self.rng = rng
        self._seen = 0

    def estimate(self, t, actions, rewards) -> np.ndarray:
        for k in range(self._seen, len(rewards)):
            self.cset.add(actions[k], rewards[k])
        self._seen = len(rewards)
        c = self.cset.center
        return sample_sphere(self.rng, self.d) if c is None else c


def _perturb(theta: np.ndarray, rng) -> np.ndarray:
    d = theta.shape[0]
    u = sample_sphere(rng, d)
    n = np.linalg.norm(theta)
    if n > 0:
        t = theta / n
        u = u - float(u @ t) * t
        u /= np.linalg.norm(u)
    a = theta + u / math.sqrt(d)
    return a / max(1.0, float(np.linalg.norm(a)))


def run_oracle_learner(env: RidgeEnvironment, oracle, policy: str, T: int, rng=None, seed: Optional[int] = None) -> BaselineSummary:
    """Play actions derived from oracle estimates; the learner never reads rewards.

    ``policy`` is "play_estimate" (a_t = current estimate) or
    "estimate_plus_perturbation" (estimate plus a 1/sqrt(d) orthogonal kick,
    rescaled into the ball). Residual is the oracle's squared-error sum against
    theta*, the quantity its budget Est = 4 d ln(e T) constrains.
    """
    if policy not in ("play_estimate", "estimate_plus_perturbation"):
        raise ValueError(f"unknown policy {policy!r}")
    rng = rng if rng is not None else np.random.default_rng()
    d, link = env.d, env.link
    q0, r0 = env.ledger.queries, env.ledger.cumulative_regret
    qo = env.oracle()
    theta = env.theta_star  # residual bookkeeping only
    A = np.zeros((T, d))
    R = np.zeros(T)
    current = None if oracle.online else np.zeros(d)
    residual = 0.0
    a = np.zeros(d)
    for t in range(T):
        if oracle.online:
            current = oracle.estimate(t + 1, A[:t], R[:t])
        a = current if policy == "play_estimate" else _perturb(current, rng)
        a = np.asarray(a, dtype=float)
        R[t] = qo.query(a)
        A[t] = a
        if not oracle.online:
            current = oracle.estimate(t + 1, A[: t + 1], R[: t + 1])
        residual += (float(link.eval(np.clip(a @ current, -1, 1))) - float(link.eval(np.clip(a @ theta, -1, 1)))) ** 2
    budget = est_budget(d, T, 4.0)
    return _summary(
        env, f"oracle_learner[{oracle.name},{policy}]", T, q0, r0, env.inner(a), seed, residual=residual, est_budget=budget
    )


# nonadaptive ---------------------------------------------------------------------

def run_nonadaptive(env: RidgeEnvironment, T: int, rng=None, restarts: int = 8, seed: Optional[int] = None) -> BaselineSummary:
    """Draw all T actions uniformly on the sphere up front, query them, fit by sphere least squares."""
    if T < env.d:
        raise ValueError("nonadaptive learner needs T >= d")
    rng = rng if rng is not None else np.random.default_rng()
    d, link = env.d, env.link
    A = rng.standard_normal((T, d))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    q0, r0 = env.ledger.queries, env.ledger.cumulative_regret
    R = env.oracle().query_many(A)
    if link.kind == "identity":
        theta_hat = sphere_ls_linear(A.T @ A, A.T @ R)
    else:
        theta_hat = constrained_least_squares(History(A, np.ones(T), R), link, None, restarts, rng)
    s = _summary(env, "nonadaptive", T, q0, r0, env.inner(A[-1]), seed, theta_hat=theta_hat)
    s.final_inner_product = env.inner(theta_hat)
    return s
