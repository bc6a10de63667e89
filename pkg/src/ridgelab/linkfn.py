"""Link functions and the epsilon thresholds derived from them.

A link maps the inner product <theta*, a> in [-1, 1] to the mean reward.
Everything downstream (hypothesis tests, schedules, theory integrals) only
touches the link through values and finite differences, never derivatives
in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateLinkError, DomainError, LinkValidationError, PreconditionError

MONOTONE = "monotone_odd_like"
EVEN = "even"

_KIND_CODES = {"identity": 0, "cubic": 1, "abs_power": 2, "signed_power": 3, "piecewise": 4}
_SYMMETRY_CODES = {"none": 0.0, "odd": 1.0, "even": 2.0}

GRID_POINTS = 512
_TIE_RTOL = 1e-9
_DOMAIN_TOL = 1e-9
_CHECK_GRID = 4001


@dataclass(frozen=True)
class LinkFunction:
    """A link f: [-1, 1] -> [-1, 1] with its regularity metadata.

    Use the classmethod constructors rather than calling this directly.
    Piecewise links are given as a breakpoint table on [0, 1] and mirrored
    according to ``symmetry`` ("odd", "even"), or on [-1, 1] with
    ``symmetry="none"``. A repeated x value encodes a jump; the leftmost
    entry wins at the breakpoint itself.
    """

    kind: str
    p: float = 1.0
    points: tuple = ()
    symmetry: str = "odd"
    lipschitz_L: Optional[float] = None
    cf_lower: Optional[float] = None
    cf_upper: Optional[float] = None
    parity: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise LinkValidationError(f"unknown link kind {self.kind!r}")
        if self.kind == "piecewise":
            self._check_table()
        elif self.kind in ("abs_power", "signed_power") and not self.p > 0:
            raise LinkValidationError("power must be positive")
        if self.kind == "signed_power" and float(self.p) != int(self.p):
            raise LinkValidationError("signed_power needs an integer power")
        if not self.parity:
            object.__setattr__(self, "parity", self._infer_parity())
        lo, hi, lip = self._analytic_metadata()
        if self.cf_lower is None and lo is not None:
            object.__setattr__(self, "cf_lower", lo)
        if self.cf_upper is None and hi is not None:
            object.__setattr__(self, "cf_upper", hi)
        if self.lipschitz_L is None and lip is not None:
            object.__setattr__(self, "lipschitz_L", lip)
        self.validate()

    # constructors -------------------------------------------------------
    @classmethod
    def identity(cls) -> "LinkFunction":
        return cls("identity")

    @classmethod
    def cubic(cls) -> "LinkFunction":
        return cls("cubic", p=3.0)

    @classmethod
    def abs_power(cls, p: float) -> "LinkFunction":
        return cls("abs_power", p=float(p))

    @classmethod
    def signed_power(cls, p: int) -> "LinkFunction":
        return cls("signed_power", p=float(p))

    @classmethod
    def piecewise(cls, points: Sequence[Sequence[float]], symmetry: str = "odd") -> "LinkFunction":
        pts = tuple((float(x), float(y)) for x, y in points)
        return cls("piecewise", points=pts, symmetry=symmetry)

    @classmethod
    def from_dict(cls, desc: dict) -> "LinkFunction":
        kind = desc.get("kind")
        if kind == "identity":
            return cls.identity()
        if kind == "cubic":
            return cls.cubic()
        if kind == "abs_power":
            return cls.abs_power(desc["p"])
        if kind == "signed_power":
            return cls.signed_power(int(desc["p"]))
        if kind == "piecewise":
            return cls.piecewise(desc["points"], desc.get("symmetry", "odd"))
        raise LinkValidationError(f"unknown link kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind in ("identity", "cubic"):
            return {"kind": self.kind}
        if self.kind == "piecewise":
            return {"kind": "piecewise", "points": [list(pt) for pt in self.points], "symmetry": self.symmetry}
        return {"kind": self.kind, "p": self.p}

    @property
    def label(self) -> str:
        if self.kind in ("abs_power", "signed_power"):
            return f"{self.kind}({self.p:g})"
        return self.kind

    # evaluation ---------------------------------------------------------
    @cached_property
    def kernel_args(self):
        """(kind code, parameter, table xs, table ys) as consumed by the kernels."""
        if self.kind == "piecewise":
            arr = np.asarray(self.points, dtype=float)
            return (4, _SYMMETRY_CODES[self.symmetry], np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1]))
        empty = np.zeros(1)
        return (_KIND_CODES[self.kind], float(self.p), empty, empty)

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """f(x) for scalar or array x in [-1, 1] (rounding slack is clamped)."""
        arr = np.asarray(x, dtype=float)
        if np.any(np.abs(arr) > 1.0 + _DOMAIN_TOL):
            raise DomainError(f"link argument outside [-1, 1]: max |x| = {np.max(np.abs(arr))}")
        flat = np.clip(arr, -1.0, 1.0).ravel()
        out = kernels.link_eval(*self.kernel_args, np.ascontiguousarray(flat)).reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def _raw(self, x):
        # no domain check; callers guarantee the range
        flat = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
        return kernels.link_eval(*self.kernel_args, flat).reshape(np.shape(x))

    def envelope_g(self, x):
        """max(|f(x)|, |f(-x)|) for x in [0, 1]."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < -_DOMAIN_TOL) or np.any(arr > 1.0 + _DOMAIN_TOL):
            raise DomainError("envelope argument outside [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        out = np.maximum(np.abs(self._raw(arr)), np.abs(self._raw(-arr)))
        return float(out) if out.ndim == 0 else out

    def derivative(self, x, h: float = 1e-6):
        """Central finite-difference slope, one-sided at the ends of [-1, 1]."""
        arr = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        hi = np.minimum(arr + h, 1.0)
        lo = np.maximum(arr - h, -1.0)
        out = (self._raw(hi) - self._raw(lo)) / (hi - lo)
        return float(out) if np.ndim(out) == 0 else out

    # validation ---------------------------------------------------------
    def _check_table(self):
        if self.symmetry not in _SYMMETRY_CODES:
            raise LinkValidationError(f"unknown symmetry {self.symmetry!r}")
        if len(self.points) < 2:
            raise LinkValidationError("piecewise link needs at least two breakpoints")
        xs = np.array([pt[0] for pt in self.points])
        if np.any(np.diff(xs) < 0):
            raise LinkValidationError("breakpoints must be sorted by x")
        start = -1.0 if self.symmetry == "none" else 0.0
        if abs(xs[0] - start) > 1e-12 or abs(xs[-1] - 1.0) > 1e-12:
            raise LinkValidationError(f"breakpoints must span [{start:g}, 1]")

    def _infer_parity(self) -> str:
        if self.kind in ("identity", "cubic"):
            return MONOTONE
        if self.kind == "abs_power":
            return EVEN
        if self.kind == "signed_power":
            return EVEN if int(self.p) % 2 == 0 else MONOTONE
        if self.symmetry == "even":
            return EVEN
        if self.symmetry == "odd":
            return MONOTONE
        grid = np.linspace(-1.0, 1.0, _CHECK_GRID)
        vals = self._raw(grid)
        return MONOTONE if np.all(np.diff(vals) >= -1e-12) else EVEN

    def _analytic_metadata(self):
        p = float(self.p)
        if self.kind == "identity":
            return 1.0, 1.0, 1.0
        if self.kind in ("cubic", "abs_power", "signed_power"):
            lo_slope = p * 0.1 ** (p - 1.0)
            if p >= 1.0:
                return lo_slope, p, p
            return p, lo_slope, None
        # piecewise: slopes of the table
        grid = np.linspace(0.1, 1.0, 2001)
        slopes = np.diff(self._raw(grid)) / np.diff(grid)
        xs = np.array([pt[0] for pt in self.points])
        ys = np.array([pt[1] for pt in self.points])
        dx = np.diff(xs)
        lip = None if np.any(dx == 0) else float(np.max(np.abs(np.diff(ys) / dx)))
        lo = float(slopes.min())
        return (lo if lo > 0 else None), float(slopes.max()), lip

    def validate(self):
        grid = np.linspace(-1.0, 1.0, _CHECK_GRID)
        vals = self._raw(grid)
        f0 = float(self._raw(np.array([0.0]))[0])
        f1 = float(self._raw(np.array([1.0]))[0])
        if abs(f0) > 1e-12 or abs(f1 - 1.0) > 1e-12:
            raise LinkValidationError(f"need f(0)=0 and f(1)=1, got {f0}, {f1}")
        if np.max(np.abs(vals)) > 1.0 + 1e-12:
            raise LinkValidationError("|f| exceeds 1 on [-1, 1]")
        if self.parity == MONOTONE:
            if np.any(np.diff(vals) < -1e-12):
                raise LinkValidationError("link flagged monotone but decreases somewhere")
        elif self.parity == EVEN:
            if np.max(np.abs(vals - vals[::-1])) > 1e-12:
                raise LinkValidationError("link flagged even but f(x) != f(-x)")
            half = vals[_CHECK_GRID // 2:]
            if np.any(np.diff(half) < -1e-12):
                raise LinkValidationError("even link must be nondecreasing on [0, 1]")
        else:
            raise LinkValidationError(f"unknown parity {self.parity!r}")
        if self.cf_lower is not None:
            zg = np.linspace(0.1, 1.0, 901)
            slopes = np.diff(self._raw(zg)) / np.diff(zg)
            if slopes.min() < 0.9 * self.cf_lower:
                raise LinkValidationError("finite-difference slope on [0.1, 1] falls below 0.9*cf_lower")


def eval_link(f: LinkFunction, x):
    return f.eval(x)


def envelope_g(f: LinkFunction, x):
    return f.envelope_g(x)


def estimate_cf_lower(f: LinkFunction, n: int = 2001) -> float:
    """Smallest finite-difference slope of f over [0.1, 1]."""
    grid = np.linspace(0.1, 1.0, n)
    return float(np.min(np.diff(f._raw(grid)) / np.diff(grid)))


# finite differences -------------------------------------------------------

def _fd_min_with_arg(f: LinkFunction, z_lo: float, z_hi: float, h: float, n: int = GRID_POINTS):
    args = f.kernel_args
    if z_hi <= z_lo:
        z = np.array([z_lo])
        vals = kernels.abs_diff_grid(*args, z, h)
        return float(vals[0]), float(z_lo)
    z = np.linspace(z_lo, z_hi, n)
    vals = kernels.abs_diff_grid(*args, z, h)
    k = int(np.argmin(vals))
    best, arg = float(vals[k]), float(z[k])
    # one local refinement on the bracket around the incumbent
    lo, hi = z[max(k - 1, 0)], z[min(k + 1, n - 1)]
    zr = np.linspace(lo, hi, n)
    vr = kernels.abs_diff_grid(*args, zr, h)
    kr = int(np.argmin(vr))
    if vr[kr] < best:
        best, arg = float(vr[kr]), float(zr[kr])
    return best, arg


def finite_difference_min(f: LinkFunction, z_lo: float, z_hi: float, h: float, n: int = GRID_POINTS) -> float:
    """min over z in [z_lo, z_hi] of |f(z + h) - f(z)| on a refined grid."""
    if h <= 0:
        raise DomainError("step h must be positive")
    if z_lo < 0 or z_hi < z_lo:
        raise DomainError("need 0 <= z_lo <= z_hi")
    if z_hi + h > 1.0 + _DOMAIN_TOL:
        raise DomainError(f"z_hi + h = {z_hi + h} exceeds 1")
    return _fd_min_with_arg(f, z_lo, z_hi, h, n)[0]


@lru_cache(maxsize=4096)
def iaht_epsilon(f: LinkFunction, d: int) -> float:
    """Half the smallest 0.2/sqrt(d)-step increment of f over [2/sqrt(d), 2.8/sqrt(d)]."""
    if d < 16:
        raise PreconditionError("initial-stage threshold needs d >= 16")
    s = math.sqrt(d)
    eps = 0.5 * finite_difference_min(f, 2.0 / s, 2.8 / s, 0.2 / s)
    if not eps > 0.0:
        raise DegenerateLinkError(f"link {f.label} is flat on the initial test window at d={d}")
    return eps


@lru_cache(maxsize=65536)
def gaht_epsilon(f: LinkFunction, d: int, x_pre: float):
    """(epsilon, y_star) for the anchored test at progress level x_pre.

    y ranges over [20/sqrt(2d), x_pre/sqrt(2)]; the inner minimum runs over
    z in [5y/6, 5y/3] with step 0.2/sqrt(2d). Near-ties go to the largest y.
    """
    s2 = math.sqrt(2.0 * d)
    y_lo = 20.0 / s2
    y_hi = x_pre / math.sqrt(2.0)
    if x_pre < (20.0 / math.sqrt(d)) * (1.0 - 1e-12) or y_hi < y_lo * (1.0 - 1e-12):
        raise PreconditionError(f"x_pre={x_pre} below 20/sqrt(d)={20.0 / math.sqrt(d)}")
    y_hi = max(y_hi, y_lo)
    h = 0.2 / s2
    if 5.0 * y_hi / 3.0 + h > 1.0 + _DOMAIN_TOL:
        raise DomainError("anchored test window exceeds [-1, 1]; x_pre too large")
    args = f.kernel_args

    def pick(ys):
        inner = kernels.gaht_inner_mins(*args, ys, h, GRID_POINTS)
        top = inner.max()
        ties = np.nonzero(inner >= top * (1.0 - _TIE_RTOL))[0]
        return int(ties[-1])

    if y_hi - y_lo <= 0.0:
        y_star = y_lo
    else:
        ys = np.linspace(y_lo, y_hi, GRID_POINTS)
        k = pick(ys)
        ys_r = np.linspace(ys[max(k - 1, 0)], ys[min(k + 1, GRID_POINTS - 1)], GRID_POINTS)
        kr = pick(ys_r)
        cand = [(ys[k]), (ys_r[kr])]
        vals = [_fd_min_with_arg(f, 5 * y / 6, 5 * y / 3, h)[0] for y in cand]
        if vals[1] > vals[0] * (1.0 + _TIE_RTOL) or (vals[1] >= vals[0] * (1.0 - _TIE_RTOL) and cand[1] > cand[0]):
            y_star = float(cand[1])
        else:
            y_star = float(cand[0])
    eps = 0.5 * _fd_min_with_arg(f, 5 * y_star / 6, 5 * y_star / 3, h)[0]
    if not eps > 0.0:
        raise DegenerateLinkError(f"link {f.label} is flat on the anchored test window at d={d}")
    return eps, y_star


@dataclass(frozen=True)
class EpsilonSchedule:
    """Per-epoch thresholds for the burn-in search, epochs 1..ceil(d/16)."""

    d: int
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def eps(self, i: int) -> float:
        """Threshold of epoch i (1-based)."""
        return float(self.values[i - 1])

    def inverse_square_sum(self) -> float:
        return float(np.sum(1.0 / self.values ** 2))


def recursive_progress(i: int, d: int) -> float:
    """x_pre used at epoch i of the recursive stage."""
    return 2.0 * math.sqrt((i - 1) / d)


def burnin_schedule(f: LinkFunction, d: int) -> EpsilonSchedule:
    m = math.ceil(d / 16)
    first = iaht_epsilon(f, d)
    vals = np.empty(m)
    vals[: min(100, m)] = first
    for i in range(101, m + 1):
        vals[i - 1] = gaht_epsilon(f, d, recursive_progress(i, d))[0]
    return EpsilonSchedule(d=d, values=vals)
