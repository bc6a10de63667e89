"""Predicted burn-in curves and costs, up to absolute constants.

Two trajectories for the best achievable inner product x_t:

- lower bound, a recursion on eps_t^2: each round adds (c/d) g(eps_t)^2,
  with g(x) = max(|f(x)|, |f(-x)|);
- upper bound, an ODE on u = x^2 whose rate is
  max_{y <= x} min_{z in [y/2, y]} f'(z)^2 / d^2.

and the matching burn-in cost integrals over u = x^2. All unspecified
constants default to 1.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import kernels
from .errors import DivergentIntegralError, DomainError
from .linkfn import LinkFunction, burnin_schedule

PANELS = 2048
FD_STEP = 1e-6
INNER_POINTS = 256
RECORD_POINTS = 1024
LOWER_BOUND = "lower_bound_recursion"
UPPER_BOUND = "upper_bound_ode"
MEASURED = "measured"
CURVE_COLUMNS = ["t", "x", "kind", "d", "link", "c", "delta"]


@dataclass
class TrajectoryCurve:
    kind: str
    t: np.ndarray
    x: np.ndarray
    params: Dict = field(default_factory=dict)
    crossing: Optional[int] = None  # first t with x_t >= params["x_target"], if requested
    t_end: int = 0  # last simulated round

    @property
    def points(self):
        return list(zip(self.t.tolist(), self.x.tolist()))

    def crossing_time(self, x_target: float) -> Optional[int]:
        """First recorded t with x >= x_target (exact only on fully recorded curves)."""
        hit = np.nonzero(self.x >= x_target)[0]
        return int(self.t[hit[0]]) if len(hit) else None

    def rows(self):
        p = self.params
        link = p.get("link", "")
        for t, x in zip(self.t, self.x):
            yield [int(t), repr(float(x)), self.kind, p.get("d", ""), link, p.get("c", ""), p.get("delta", "")]

    def write_csv(self, path, header: bool = True, mode: str = "w"):
        with open(path, mode, newline="") as fh:
            w = csv.writer(fh)
            if header:
                w.writerow(CURVE_COLUMNS)
            w.writerows(self.rows())


def _record_times(t_max: int, n: int = RECORD_POINTS) -> np.ndarray:
    if t_max <= n:
        return np.arange(1, t_max + 1, dtype=np.int64)
    return np.unique(np.geomspace(1, t_max, n).astype(np.int64))


def _integrate(mode, link, tab_x, tab_f, coef, u0, t_max, u_target, leap_tol, rec):
    rec_u, t_end, u_end, t_cross = kernels.integrate_rate(
        mode, *link.kernel_args, tab_x, tab_f, float(coef), float(u0), int(t_max), float(u_target), float(leap_tol), rec
    )
    keep = ~np.isnan(rec_u)
    t, u = rec[keep], rec_u[keep]
    if u_end >= 1.0 and (len(t) == 0 or t[-1] < t_end):
        # always report the terminal (clipped) point of a run that hit the unit sphere
        t, u = np.append(t, t_end), np.append(u, u_end)
    return t, np.sqrt(np.minimum(u, 1.0)), int(t_end), float(u_end), int(t_cross)


def lb_epsilon_sequence(
    link: LinkFunction,
    d: int,
    c: float = 1.0,
    delta: float = math.exp(-1.0),
    t_max: int = 10**6,
    x_target: float = 0.5,
    leap_tol: float = 0.0,
    record: Optional[np.ndarray] = None,
) -> TrajectoryCurve:
    """eps_1 = sqrt(c ln(1/delta)/d), eps_{t+1}^2 = eps_t^2 + (c/d) g(eps_t)^2, stopped at eps >= 1.

    ``leap_tol > 0`` takes k rounds at once whenever k*increment <= leap_tol*eps^2
    (midpoint rate), for very long horizons. ``crossing`` is the first t with
    eps_t >= x_target.
    """
    if not c > 0 or not 0 < delta < 1 or d < 2:
        raise DomainError("need c > 0, delta in (0, 1), d >= 2")
    u0 = c * math.log(1.0 / delta) / d
    rec = _record_times(t_max) if record is None else np.asarray(record, dtype=np.int64)
    empty = np.zeros(1)
    t, x, t_end, _, t_cross = _integrate(0, link, empty, empty, c / d, u0, t_max, x_target ** 2, leap_tol, rec)
    params = {"d": d, "c": c, "delta": delta, "link": link.label, "x_target": x_target, "scale": "up to constants"}
    return TrajectoryCurve(LOWER_BOUND, t, x, params, t_cross if t_cross > 0 else None, t_end)


def inner_min_sq_derivative(link: LinkFunction, y: np.ndarray, h: float = FD_STEP, n: int = INNER_POINTS) -> np.ndarray:
    """min over z in [y/2, y] of f'(z)^2, f' by central finite differences."""
    y = np.asarray(y, dtype=float)
    s = np.linspace(0.5, 1.0, n)
    z = y[:, None] * s[None, :]
    fp = link.derivative(z.ravel(), h).reshape(z.shape)
    return np.min(fp * fp, axis=1)


def maxmin_rate(link: LinkFunction, x: np.ndarray, y_lo: float, h: float = FD_STEP) -> np.ndarray:
    """max over y in [y_lo, x] of min_{z in [y/2, y]} f'(z)^2, on an increasing grid x."""
    x = np.asarray(x, dtype=float)
    return np.maximum.accumulate(inner_min_sq_derivative(link, np.maximum(x, y_lo), h))


def ub_trajectory_ode(
    link: LinkFunction,
    d: int,
    x0: float,
    t_max: int = 10**6,
    x_target: float = 0.5,
    leap_tol: float = 0.0,
    table_points: int = 8192,
    record: Optional[np.ndarray] = None,
) -> TrajectoryCurve:
    """Euler with unit step on u = x^2: u_{t+1} = u_t + F(x_t)/d^2, stopped at x = 1.

    F(x) = max_{x0 <= y <= x} min_{z in [y/2, y]} f'(z)^2 is tabulated on a
    grid of [x0, 1] and interpolated. Round t = 0 holds x0.
    """
    if not 0 < x0 < 1:
        raise DomainError("x0 must lie in (0, 1)")
    tab_x = np.linspace(x0, 1.0, table_points)
    tab_f = maxmin_rate(link, tab_x, x0)
    rec = _record_times(t_max + 1) if record is None else np.asarray(record, dtype=np.int64) + 1
    t, x, t_end, _, t_cross = _integrate(1, link, tab_x, tab_f, 1.0 / d ** 2, x0 * x0, t_max + 1, x_target ** 2, leap_tol, rec)
    params = {"d": d, "c": "", "delta": "", "link": link.label, "x0": x0, "x_target": x_target, "scale": "up to constants"}
    return TrajectoryCurve(UPPER_BOUND, t - 1, x, params, (t_cross - 1) if t_cross > 0 else None, t_end - 1)


def _u_grid(u_lo: float, u_hi: float, panels: int) -> np.ndarray:
    # trapezoid nodes in u, geometrically graded: the integrands span many
    # orders of magnitude near u_lo, where a uniform grid is badly biased
    return np.geomspace(u_lo, u_hi, panels + 1)


def _trapezoid(y: np.ndarray, u: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(u)))


def burnin_integral_ub(link: LinkFunction, d: int, eps_target: float, c: float = 1.0, panels: int = PANELS, h: float = FD_STEP) -> float:
    """d^2 * int_{c/d}^{eps^2} du / max_{sqrt(c/d) <= y <= sqrt(u)} min_{z in [y/2, y]} f'(z)^2."""
    x_lo = math.sqrt(c / d)
    if eps_target < x_lo * (1 - 1e-12) or eps_target > 0.5 + 1e-12:
        raise DomainError(f"eps_target must lie in [sqrt(c/d), 1/2] = [{x_lo}, 0.5]")
    if eps_target <= x_lo:
        return 0.0
    u = _u_grid(x_lo * x_lo, eps_target * eps_target, panels)
    F = maxmin_rate(link, np.sqrt(u), x_lo, h)
    if np.any(F <= 0):
        raise DivergentIntegralError("max-min squared derivative vanishes on the range")
    return d * d * _trapezoid(1.0 / F, u)


def burnin_integral_lb(link: LinkFunction, d: int, eps_target: float, logT: float, c: float = 1.0, panels: int = PANELS) -> float:
    """d * int_{c logT/d}^{eps^2} du / g(sqrt(u))^2."""
    x_lo = math.sqrt(c * logT / d)
    if eps_target < x_lo * (1 - 1e-12) or eps_target > 1.0:
        raise DomainError(f"eps_target must lie in [sqrt(c logT/d), 1] = [{x_lo}, 1]")
    if eps_target <= x_lo:
        return 0.0
    u = _u_grid(x_lo * x_lo, eps_target * eps_target, panels)
    g = link.envelope_g(np.sqrt(u))
    if np.any(g <= 0):
        raise DivergentIntegralError("envelope g vanishes on the range")
    return d * _trapezoid(1.0 / (g * g), u)


@dataclass
class BridgeReport:
    d: int
    link: str
    schedule_sum: float
    integral: float
    ratio: float
    within: bool


def lemma_c1_bridge_check(link: LinkFunction, d: int, bound: float = 64.0) -> BridgeReport:
    """Compare sum_i 1/eps_i^2 of the burn-in schedule with the upper-bound integral at 1/2."""
    s = burnin_schedule(link, d).inverse_square_sum()
    integral = burnin_integral_ub(link, d, 0.5)
    ratio = s / integral
    return BridgeReport(d, link.label, s, integral, ratio, 1.0 / bound <= ratio <= bound)


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
