"""numba-compiled kernels. Same signatures as ``_numpy``.

Scalar helpers are inlined at the numba IR level; as plain calls they cost
~50 ns each and dominate the grid loops.
"""
import math

import numpy as np

from .._accel import njit


@njit(cache=True, inline="always")
def _interp_table(xs, ys, x):
    n = xs.shape[0]
    if x <= xs[0]:
        return ys[0]
    if x >= xs[n - 1]:
        return ys[n - 1]
    lo = 0
    hi = n - 1
    # first index with xs[i] >= x
    while lo < hi:
        mid = (lo + hi) // 2
        if xs[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    if xs[lo] == x:
        return ys[lo]
    x0 = xs[lo - 1]
    x1 = xs[lo]
    w = (x - x0) / (x1 - x0)
    return ys[lo - 1] + w * (ys[lo] - ys[lo - 1])


@njit(cache=True, inline="always")
def link_scalar(kind, p, xs, ys, x):
    if kind == 0:
        return x
    if kind == 1:
        return x * x * x
    if kind == 2:
        return abs(x) ** p
    if kind == 3:
        k = int(p)
        out = 1.0
        for _ in range(k):
            out *= x
        return out
    # piecewise table on [0, 1]; p encodes the symmetry (1 odd, 2 even, 0 none)
    if p == 0.0 or x >= 0.0:
        return _interp_table(xs, ys, x)
    v = _interp_table(xs, ys, -x)
    if p == 1.0:
        return -v
    return v


@njit(cache=True)
def link_eval(kind, p, xs, ys, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = link_scalar(kind, p, xs, ys, x[i])
    return out


@njit(cache=True)
def abs_diff_grid(kind, p, xs, ys, z, h):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = abs(link_scalar(kind, p, xs, ys, z[i] + h) - link_scalar(kind, p, xs, ys, z[i]))
    return out


@njit(cache=True)
def gaht_inner_mins(kind, p, xs, ys, y, h, n_z):
    out = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        lo = 5.0 * y[i] / 6.0
        hi = 5.0 * y[i] / 3.0
        best = np.inf
        for j in range(n_z):
            z = lo + (hi - lo) * j / (n_z - 1)
            v = abs(link_scalar(kind, p, xs, ys, z + h) - link_scalar(kind, p, xs, ys, z))
            if v < best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def feasibility_search(kind, p, xs, ys, r_minus, r_plus, zs, xg):
    best = np.inf
    bi = 0
    bj = 0
    for i in range(zs.shape[0]):
        for j in range(xg.shape[0]):
            a = abs(r_minus - link_scalar(kind, p, xs, ys, zs[i] - xg[j]))
            b = abs(r_plus - link_scalar(kind, p, xs, ys, zs[i] + xg[j]))
            m = a if a > b else b
            if m < best:
                best = m
                bi = i
                bj = j
    return best, bi, bj


@njit(cache=True, inline="always")
def _rate(mode, kind, p, xs, ys, tab_x, tab_f, x):
    if mode == 0:
        a = abs(link_scalar(kind, p, xs, ys, x))
        b = abs(link_scalar(kind, p, xs, ys, -x))
        g = a if a > b else b
        return g * g
    return _interp_table(tab_x, tab_f, x)


@njit(cache=True)
def integrate_rate(mode, kind, p, xs, ys, tab_x, tab_f, coef, u0, t_max, u_target, leap_tol, rec_t):
    rec_u = np.full(rec_t.shape[0], np.nan)
    t = 1
    u = u0
    k_rec = 0
    t_cross = -1
    if u >= u_target:
        t_cross = 1
    while k_rec < rec_t.shape[0] and rec_t[k_rec] <= t:
        if rec_t[k_rec] == t:
            rec_u[k_rec] = u
        k_rec += 1
    while t < t_max and u < 1.0:
        inc = coef * _rate(mode, kind, p, xs, ys, tab_x, tab_f, math.sqrt(u))
        if inc <= 0.0:
            break
        k = 1
        if leap_tol > 0.0:
            k = int(leap_tol * u / inc)
            if k >= 2:
                um = u + 0.5 * k * inc
                if um > 1.0:
                    um = 1.0
                inc = coef * _rate(mode, kind, p, xs, ys, tab_x, tab_f, math.sqrt(um))
            else:
                k = 1
        if t + k > t_max:
            k = t_max - t
        u_new = u + k * inc
        t_new = t + k
        if t_cross < 0 and u_new >= u_target:
            t_cross = t + int(math.ceil((u_target - u) / inc))
            if t_cross > t_new:
                t_cross = t_new
        while k_rec < rec_t.shape[0] and rec_t[k_rec] <= t_new:
            rec_u[k_rec] = u + (rec_t[k_rec] - t) * inc
            k_rec += 1
        u = u_new
        t = t_new
    return rec_u, t, u, t_cross
