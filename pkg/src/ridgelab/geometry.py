"""Sphere sampling, orthogonal-complement sampling and direction bookkeeping."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import BallViolationError, FullBasisError, NonUnitVectorError

ORTHO_TOL = 1e-9
_MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def splitmix64(x: int) -> int:
    x = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, *keys: int) -> int:
    """base_seed XOR hash(keys): independent, reproducible per-trial streams."""
    h = 0
    for k in keys:
        h = splitmix64(h ^ splitmix64(k))
    return (int(base_seed) ^ h) & _MASK64


def is_unit(v, tol: float = 1e-12) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


def sample_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    """Uniform point on S^{d-1} (normalized Gaussian)."""
    while True:
        g = rng.standard_normal(d)
        n = np.linalg.norm(g)
        if n > 0:
            return g / n


class DirectionBasis:
    """Growing orthonormal set v_1, ..., v_k in R^d.

    ``capacity`` caps the number of vectors (the burn-in uses ceil(d/16));
    it defaults to d.
    """

    def __init__(self, dim: int, capacity: Optional[int] = None):
        self.dim = int(dim)
        self.capacity = self.dim if capacity is None else int(capacity)
        self._vecs = np.zeros((0, self.dim))

    def __len__(self):
        return self._vecs.shape[0]

    @property
    def vectors(self) -> np.ndarray:
        return self._vecs.copy()

    def project_out(self, x: np.ndarray) -> np.ndarray:
        """Component of x orthogonal to the span (two Gram-Schmidt passes)."""
        y = np.array(x, dtype=float)
        if len(self):
            for _ in range(2):
                y -= self._vecs.T @ (self._vecs @ y)
        return y

    def add(self, v: np.ndarray) -> np.ndarray:
        """Re-orthogonalize v against the basis, normalize and append it."""
        if len(self) >= self.capacity:
            raise FullBasisError(f"basis already holds {len(self)} vectors")
        y = self.project_out(v)
        n = np.linalg.norm(y)
        if n < 1e-6:
            raise ValueError("vector lies (numerically) in the current span")
        y /= n
        if len(self) and np.max(np.abs(self._vecs @ y)) > ORTHO_TOL:
            raise AssertionError("orthonormality lost after re-orthogonalization")
        self._vecs = np.vstack([self._vecs, y])
        return y

    def mean_direction(self, k: Optional[int] = None) -> np.ndarray:
        """(1/sqrt(k)) * sum of the first k vectors."""
        k = len(self) if k is None else k
        return self._vecs[:k].sum(axis=0) / math.sqrt(k)


def sample_complement(rng: np.random.Generator, basis: DirectionBasis) -> np.ndarray:
    """Uniform unit vector in the orthogonal complement of the basis span."""
    if len(basis) >= basis.dim:
        raise FullBasisError("no orthogonal complement left")
    while True:
        y = basis.project_out(rng.standard_normal(basis.dim))
        n = np.linalg.norm(y)
        if n > 1e-8:
            return y / n


def combine_scaled(u: np.ndarray, v: np.ndarray, a: float, b: float) -> np.ndarray:
    """a*u + b*v, refused if it leaves the unit ball."""
    out = a * np.asarray(u, dtype=float) + b * np.asarray(v, dtype=float)
    if np.linalg.norm(out) > 1.0 + 1e-9:
        raise BallViolationError(f"combined action has norm {np.linalg.norm(out):.6g} > 1")
    return out


def require_unit(v, name: str = "vector", tol: float = 1e-12):
    if not is_unit(v, tol):
        raise NonUnitVectorError(f"{name} must be a unit vector (norm {np.linalg.norm(v):.12g})")


# anti-concentration constant ----------------------------------------------

def marginal_window_frequency(
    rng: np.random.Generator, dim: int, lo: float, hi: float, scale: float = 1.0, n: int = 100_000
) -> float:
    """Monte Carlo P(scale * v_1 in [lo, hi]) for v uniform on S^{dim-1}.

    Draws v_1 exactly as g_1 / sqrt(g_1^2 + chi^2_{dim-1}), which has the
    same law as the first coordinate of a normalized Gaussian vector.
    """
    g1 = rng.standard_normal(n)
    rest = rng.chisquare(dim - 1, n) if dim > 1 else np.zeros(n)
    x = scale * g1 / np.sqrt(g1 * g1 + rest)
    return float(np.mean((x >= lo) & (x <= hi)))


def worst_case_projection(d: int, m: int) -> float:
    """Smallest ||Proj_{V^perp} theta*|| the burn-in analysis allows at its last epoch."""
    return math.sqrt(max(1.0 - (m - 1) * 9.0 / d, 0.25))


@lru_cache(maxsize=256)
def anticoncentration_constant(d: int, m: int, alpha: float = 2.2, beta: float = 2.8, n: int = 100_000, seed: int = 0) -> float:
    """Measured c(alpha, beta): P(<theta, v> in [alpha, beta]/sqrt(d)) in the worst case.

    v is uniform on the sphere of a (d - m)-dimensional complement and theta
    has the smallest complement projection the burn-in analysis permits.
    """
    rng = make_rng(derive_seed(seed, d, m))
    lam = worst_case_projection(d, m)
    s = math.sqrt(d)
    c = marginal_window_frequency(rng, d - m, alpha / s, beta / s, scale=lam, n=n)
    # zero hits would make every budget infinite; fall back to one pseudo-hit
    return max(c, 1.0 / n)
