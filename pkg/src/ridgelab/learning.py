"""Learning phase: explore around an anchor a0, fit theta by least squares, commit.

The explore actions cycle through (3*a0 + e_j)/4, so an explore history has
at most d distinct actions. The history is kept as per-action counts and
mean rewards; the least-squares objective differs from the per-sample one
only by a constant, so the minimizers are identical.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .env import QueryOracle, RidgeEnvironment
from .errors import InsufficientDataError
from .geometry import require_unit, sample_sphere
from .linkfn import LinkFunction, estimate_cf_lower

FD_STEP = 1e-6
GRAD_TOL = 1e-8
MAX_ITERS = 500
HALF = 0.5
CLIP = 10.0


def explore_action(a0: np.ndarray, t: int) -> np.ndarray:
    """t-th explore action (t >= 1): (3*a0 + e_{(t mod d)+1})/4, 1-based basis index."""
    a = 0.75 * np.asarray(a0, dtype=float)
    a[t % a.shape[0]] += 0.25
    return a


def explore_actions(a0: np.ndarray, d: Optional[int] = None):
    """Infinite cyclic generator of explore actions, t = 1, 2, ..."""
    a0 = np.asarray(a0, dtype=float)
    require_unit(a0, "a0", 1e-9)
    if d is not None and a0.shape != (d,):
        raise ValueError("a0 has the wrong dimension")
    t = 1
    while True:
        yield explore_action(a0, t)
        t += 1


def explore_counts(m: int, d: int) -> np.ndarray:
    """How often each basis index j (0-based) is used in rounds t = 1..m."""
    counts = np.full(d, m // d, dtype=np.int64)
    rem = m % d
    # rounds m - rem + 1 .. m use indices (m - rem + 1) mod d, ...
    for t in range(m - rem + 1, m + 1):
        counts[t % d] += 1
    return counts


@dataclass
class History:
    """Aggregated (action, reward) observations: rows are distinct actions."""

    actions: np.ndarray
    counts: np.ndarray
    means: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[np.ndarray, float]]) -> "History":
        if not pairs:
            raise InsufficientDataError("history is empty")
        A = np.array([np.asarray(a, dtype=float) for a, _ in pairs])
        r = np.array([float(x) for _, x in pairs])
        return cls(A, np.ones(len(r)), r)

    def __len__(self):
        return int(np.sum(self.counts))

    def objective(self, theta, link: LinkFunction) -> float:
        res = link.eval(np.clip(self.actions @ theta, -1.0, 1.0)) - self.means
        return float(np.sum(self.counts * res * res))


def project_feasible(theta: np.ndarray, a0: Optional[np.ndarray]) -> np.ndarray:
    """Normalize; if <theta, a0> < 1/2 rotate within span(theta, a0) onto the boundary."""
    theta = np.asarray(theta, dtype=float)
    n = np.linalg.norm(theta)
    theta = theta / n if n > 0 else (a0.copy() if a0 is not None else theta)
    if a0 is None or float(theta @ a0) >= HALF:
        return theta
    w = theta - float(theta @ a0) * a0
    nw = np.linalg.norm(w)
    if nw < 1e-12:
        # theta = -a0: any direction orthogonal to a0 works; pick a fixed one
        k = int(np.argmin(np.abs(a0)))
        w = -a0[k] * a0
        w[k] += 1.0
        nw = np.linalg.norm(w)
    w /= nw
    out = HALF * a0 + math.sqrt(3.0) / 2.0 * w
    return out / np.linalg.norm(out)


def _residuals(theta, hist: History, link: LinkFunction, sw):
    x = np.clip(hist.actions @ theta, -1.0, 1.0)
    return sw * (link.eval(x) - hist.means), x


def _fit_from(theta, hist: History, link: LinkFunction, a0, tol, max_iters):
    """Riemannian Levenberg-Marquardt on the sphere, projected onto the cap."""
    sw = np.sqrt(hist.counts.astype(float))
    A = hist.actions
    d = A.shape[1]
    rho, x = _residuals(theta, hist, link, sw)
    obj = float(rho @ rho)
    mu = 1e-3
    for _ in range(max_iters):
        J = (sw * link.derivative(x, FD_STEP))[:, None] * A
        P = np.eye(d) - np.outer(theta, theta)
        Jt = J @ P
        grad = Jt.T @ rho
        if a0 is not None and float(theta @ a0) <= HALF + 1e-12:
            # on the boundary, ignore the component pushing out of the cap
            nrm = P @ a0
            nn = float(nrm @ nrm)
            if nn > 0:
                gn = float(grad @ nrm) / nn
                if gn > 0:
                    grad = grad - gn * nrm
        if np.linalg.norm(2.0 * grad) <= tol:
            break
        H = Jt.T @ Jt
        improved = False
        for _ in range(30):
            step = -np.linalg.solve(H + mu * (np.eye(d) + np.diag(np.diag(H))), Jt.T @ rho)
            step = P @ step
            cand = project_feasible(theta + step, a0)
            rho_c, x_c = _residuals(cand, hist, link, sw)
            obj_c = float(rho_c @ rho_c)
            if obj_c < obj:
                improved = True
                break
            mu *= 10.0
        if not improved:
            break
        small = np.linalg.norm(cand - theta) < 1e-14
        theta, rho, x, obj = cand, rho_c, x_c, obj_c
        mu = max(mu / 10.0, 1e-12)
        if small:
            break
    return theta, obj


def constrained_least_squares(
    history,
    link: LinkFunction,
    a0: Optional[np.ndarray],
    restarts: int = 8,
    rng: Optional[np.random.Generator] = None,
    warm_start: Optional[np.ndarray] = None,
    tol: float = GRAD_TOL,
    max_iters: int = MAX_ITERS,
) -> np.ndarray:
    """argmin of sum_t (f(<theta, a_t>) - r_t)^2 over unit theta with <theta, a0> >= 1/2.

    ``history`` is a History or a list of (action, reward) pairs. With
    ``a0=None`` the constraint is dropped (whole sphere). Starts: a0, the warm
    start and ``restarts`` random feasible points; the best local optimum wins.
    """
    hist = history if isinstance(history, History) else History.from_pairs(history)
    if len(hist.means) == 0:
        raise InsufficientDataError("history is empty")
    d = hist.actions.shape[1]
    rng = rng if rng is not None else np.random.default_rng(0)
    starts = []
    if a0 is not None:
        a0 = np.asarray(a0, dtype=float)
        a0 = a0 / np.linalg.norm(a0)
        starts.append(a0.copy())
    if warm_start is not None:
        starts.append(project_feasible(warm_start, a0))
    for _ in range(restarts):
        u = sample_sphere(rng, d)
        if a0 is not None:
            # uniform-ish point of the cap: blend toward a0 until feasible
            c = float(u @ a0)
            if c < HALF:
                u = project_feasible(u + (HALF - c + rng.uniform(0, 0.5)) * a0, a0)
        starts.append(u)
    best, best_obj = None, math.inf
    for s in starts:
        th, obj = _fit_from(s, hist, link, a0, tol, max_iters)
        if obj < best_obj:
            best, best_obj = th, obj
    return best


@dataclass
class LearnOutcome:
    theta_hat: np.ndarray
    m_explore: int
    total_queries: int
    cumulative_regret: float
    estimation_gap: float = math.nan
    explore_regret: float = 0.0
    commit_regret: float = 0.0
    curve: List[Tuple[int, float, str]] = field(default_factory=list)

    def write_regret_curve(self, path):
        """Columns: t, cum_regret, phase."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "cum_regret", "phase"])
            for t, r, ph in self.curve:
                w.writerow([t, repr(r), ph])


def explore_length(T: int, d: int, mode: str, cf_lower: float) -> int:
    if mode == "estimation":
        return int(T)
    if mode != "regret":
        raise ValueError(f"unknown mode {mode!r}")
    return int(min(T, math.ceil(d * math.sqrt(T) / cf_lower)))


def run_learning(
    env,
    a0: np.ndarray,
    T: int,
    mode: str = "regret",
    cf_lower: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    restarts: int = 8,
    clip_rewards: bool = False,
    warm_start: Optional[np.ndarray] = None,
) -> LearnOutcome:
    """Explore for m rounds, fit theta_hat under <theta, a0> >= 1/2, then play theta_hat."""
    if T < 1:
        raise ValueError("T must be at least 1")
    oracle: QueryOracle = env.oracle() if isinstance(env, RidgeEnvironment) else env
    diag = env if isinstance(env, RidgeEnvironment) else None
    d, link = oracle.d, oracle.link
    a0 = np.asarray(a0, dtype=float)
    require_unit(a0, "a0", 1e-9)
    if cf_lower is None:
        cf_lower = link.cf_lower if link.cf_lower else estimate_cf_lower(link)
    m = explore_length(T, d, mode, cf_lower)
    start_q = oracle.queries_used
    start_r = diag.ledger.cumulative_regret if diag else 0.0
    counts = explore_counts(m, d)
    idx = np.nonzero(counts)[0]
    actions = np.array([explore_action(a0, j) for j in idx])
    means = np.empty(len(idx))
    curve = []
    for k, j in enumerate(idx):
        means[k] = oracle.query_batch(actions[k], int(counts[j]))
        if diag:
            curve.append((oracle.queries_used - start_q, diag.ledger.cumulative_regret - start_r, "explore"))
    if clip_rewards:
        means = np.clip(means, -CLIP, CLIP)
    hist = History(actions, counts[idx], means)
    theta_hat = constrained_least_squares(hist, link, a0, restarts, rng, warm_start)
    explore_regret = (diag.ledger.cumulative_regret - start_r) if diag else 0.0
    if T > m:
        oracle.query_batch(theta_hat, T - m)
        if diag:
            curve.append((oracle.queries_used - start_q, diag.ledger.cumulative_regret - start_r, "commit"))
    total_r = (diag.ledger.cumulative_regret - start_r) if diag else 0.0
    gap = (1.0 - diag.inner(theta_hat)) if diag else math.nan
    return LearnOutcome(
        theta_hat, m, oracle.queries_used - start_q, total_r, gap, explore_regret, total_r - explore_regret, curve
    )
