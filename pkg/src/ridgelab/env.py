"""Ridge bandit environment: hidden direction, noisy rewards, ledger.

Learners never receive the environment itself. They get a ``QueryOracle``,
which exposes queries, the dimension and the (known) link, and nothing
about theta*.

Repeated queries of one action are drawn as a single Gaussian sample mean,
N(f(<theta*, a>), sigma^2 / n), which has exactly the law of the average of
n independent queries. The ledger still advances by n, so query counts and
regret are exact. This is what makes burn-in runs that need 1e11+ queries
cheap to simulate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import BallViolationError, BudgetExceeded
from .geometry import require_unit, sample_sphere
from .linkfn import LinkFunction

BALL_TOL = 1e-9


@dataclass
class LedgerEntry:
    t_start: int  # index of the first query in this entry (1-based)
    count: int
    inner_product: float
    reward: float  # mean reward over the entry


@dataclass
class Ledger:
    queries: int = 0
    cumulative_regret: float = 0.0
    trajectory: List[LedgerEntry] = field(default_factory=list)
    max_inner_product: float = -math.inf


class RidgeEnvironment:
    def __init__(
        self,
        d: int,
        link: LinkFunction,
        theta_star: np.ndarray,
        noise_sigma: float = 1.0,
        rng: Optional[np.random.Generator] = None,
        max_queries: Optional[int] = None,
        log_every: int = 1,
    ):
        theta_star = np.asarray(theta_star, dtype=float)
        if theta_star.shape != (d,):
            raise ValueError(f"theta_star must have shape ({d},)")
        require_unit(theta_star, "theta_star")
        if noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        self.d = int(d)
        self.link = link
        self._theta = theta_star.copy()
        self.noise_sigma = float(noise_sigma)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.max_queries = max_queries
        self.log_every = max(int(log_every), 1)
        self.ledger = Ledger()
        self._f1 = float(link.eval(1.0))
        self._entries_seen = 0

    # harness-side views ------------------------------------------------
    @property
    def theta_star(self) -> np.ndarray:
        """Ground truth. For harness diagnostics and the adversarial tie-breaker only."""
        return self._theta.copy()

    def inner(self, a) -> float:
        return float(np.dot(self._theta, a))

    def per_step_regret(self, a) -> float:
        return self._f1 - float(self.link.eval(np.clip(self.inner(a), -1.0, 1.0)))

    def oracle(self) -> "QueryOracle":
        return QueryOracle(self)

    # queries -------------------------------------------------------------
    def _check_action(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape != (self.d,):
            raise ValueError(f"action must have shape ({self.d},)")
        if np.linalg.norm(a) > 1.0 + BALL_TOL:
            raise BallViolationError(f"action norm {np.linalg.norm(a):.12g} exceeds 1")
        return a

    def _charge(self, n: int):
        if self.max_queries is not None and self.ledger.queries + n > self.max_queries:
            raise BudgetExceeded(f"query budget {self.max_queries} exhausted")

    def _log(self, n: int, x: float, mean: float, fx: float):
        led = self.ledger
        t0 = led.queries + 1
        led.queries += n
        led.cumulative_regret += n * (self._f1 - fx)
        if x > led.max_inner_product:
            led.max_inner_product = x
        self._entries_seen += 1
        if self.log_every == 1 or self._entries_seen % self.log_every == 0:
            led.trajectory.append(LedgerEntry(t0, n, x, mean))

    def query(self, a) -> float:
        return self.query_batch(a, 1)

    def query_batch(self, a, n: int) -> float:
        """Mean reward of n independent queries of action a."""
        n = int(n)
        if n < 1:
            raise ValueError("n must be at least 1")
        a = self._check_action(a)
        self._charge(n)
        x = float(np.clip(np.dot(self._theta, a), -1.0, 1.0))
        fx = float(self.link.eval(x))
        mean = fx
        if self.noise_sigma > 0:
            mean = fx + self.noise_sigma / math.sqrt(n) * float(self.rng.standard_normal())
        self._log(n, x, mean, fx)
        return mean

    def query_many(self, actions) -> np.ndarray:
        """One query per row of ``actions``; rewards in row order."""
        A = np.asarray(actions, dtype=float)
        if A.ndim != 2 or A.shape[1] != self.d:
            raise ValueError("actions must be an (n, d) array")
        if np.any(np.linalg.norm(A, axis=1) > 1.0 + BALL_TOL):
            raise BallViolationError("an action exceeds the unit ball")
        self._charge(A.shape[0])
        x = np.clip(A @ self._theta, -1.0, 1.0)
        fx = self.link.eval(x)
        r = fx + self.noise_sigma * self.rng.standard_normal(A.shape[0]) if self.noise_sigma > 0 else fx.copy()
        for xi, ri, fi in zip(x, r, fx):
            self._log(1, float(xi), float(ri), float(fi))
        return r

    # export ----------------------------------------------------------------
    def write_trajectory_csv(self, path):
        """Columns: t, inner_product, reward, cum_regret, cum_queries (one row per entry)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "inner_product", "reward", "cum_regret", "cum_queries"])
            cum_r = 0.0
            for e in self.ledger.trajectory:
                cum_r += e.count * (self._f1 - float(self.link.eval(e.inner_product)))
                t_end = e.t_start + e.count - 1
                w.writerow([t_end, repr(e.inner_product), repr(e.reward), repr(cum_r), t_end])

    def rederived_regret(self) -> float:
        """Cumulative regret recomputed from the trajectory (exact when log_every == 1)."""
        tr = self.ledger.trajectory
        if not tr:
            return 0.0
        x = np.array([e.inner_product for e in tr])
        n = np.array([e.count for e in tr], dtype=float)
        return float(np.sum(n * (self._f1 - self.link.eval(x))))


class QueryOracle:
    """The only handle a learner gets on an environment."""

    def __init__(self, env: RidgeEnvironment):
        self._env = env
        self.d = env.d
        self.link = env.link

    def query(self, a) -> float:
        return self._env.query(a)

    def query_batch(self, a, n: int) -> float:
        return self._env.query_batch(a, n)

    def query_many(self, actions) -> np.ndarray:
        return self._env.query_many(actions)

    @property
    def queries_used(self) -> int:
        return self._env.ledger.queries


def spawn(
    d: int,
    link: LinkFunction,
    noise_sigma: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    theta_star=None,
    max_queries: Optional[int] = None,
    log_every: int = 1,
) -> RidgeEnvironment:
    """Fresh environment; theta* drawn uniformly from rng when not given."""
    rng = rng if rng is not None else np.random.default_rng()
    if theta_star is None:
        theta_star = sample_sphere(rng, d)
    return RidgeEnvironment(d, link, theta_star, noise_sigma, rng, max_queries, log_every)
