"""Pure-numpy reference kernels. Same signatures as ``_numba``."""
import math

import numpy as np


def _interp_table(xs, ys, x):
    x = np.asarray(x, dtype=float)
    i = np.searchsorted(xs, x, side="left")
    i = np.clip(i, 1, len(xs) - 1)
    x0, x1 = xs[i - 1], xs[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(x1 > x0, (x - x0) / (x1 - x0), 1.0)
    out = ys[i - 1] + w * (ys[i] - ys[i - 1])
    out = np.where(xs[i - 1] == x, ys[i - 1], out)
    out = np.where(x <= xs[0], ys[0], out)
    return np.where(x >= xs[-1], ys[-1], out)


def link_eval(kind, p, xs, ys, x):
    x = np.asarray(x, dtype=float)
    if kind == 0:
        return x.copy()
    if kind == 1:
        return x * x * x
    if kind == 2:
        return np.abs(x) ** p
    if kind == 3:
        return x ** int(p)
    if p == 0.0:
        return _interp_table(xs, ys, x)
    v = _interp_table(xs, ys, np.abs(x))
    if p == 1.0:
        return np.where(x < 0.0, -v, v)
    return v


def link_scalar(kind, p, xs, ys, x):
    return float(link_eval(kind, p, xs, ys, np.array([x]))[0])


def abs_diff_grid(kind, p, xs, ys, z, h):
    return np.abs(link_eval(kind, p, xs, ys, z + h) - link_eval(kind, p, xs, ys, z))


def gaht_inner_mins(kind, p, xs, ys, y, h, n_z):
    frac = np.linspace(0.0, 1.0, n_z)
    lo = 5.0 * y / 6.0
    hi = 5.0 * y / 3.0
    z = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    return abs_diff_grid(kind, p, xs, ys, z, h).min(axis=1)


def feasibility_search(kind, p, xs, ys, r_minus, r_plus, zs, xg):
    a = np.abs(r_minus - link_eval(kind, p, xs, ys, zs[:, None] - xg[None, :]))
    b = np.abs(r_plus - link_eval(kind, p, xs, ys, zs[:, None] + xg[None, :]))
    m = np.maximum(a, b)
    flat = int(np.argmin(m))
    i, j = divmod(flat, len(xg))
    return float(m[i, j]), i, j


def integrate_rate(mode, kind, p, xs, ys, tab_x, tab_f, coef, u0, t_max, u_target, leap_tol, rec_t):
    if mode == 0:
        def rate(x):
            f = link_eval(kind, p, xs, ys, np.array([x, -x]))
            g = max(abs(f[0]), abs(f[1]))
            return g * g
    else:
        tx = [float(v) for v in tab_x]
        tf = [float(v) for v in tab_f]

        def rate(x):
            return _scalar_interp(tx, tf, x)

    rec_u = np.full(len(rec_t), np.nan)
    t, u = 1, float(u0)
    k_rec = 0
    t_cross = 1 if u >= u_target else -1
    while k_rec < len(rec_t) and rec_t[k_rec] <= t:
        if rec_t[k_rec] == t:
            rec_u[k_rec] = u
        k_rec += 1
    while t < t_max and u < 1.0:
        inc = coef * rate(math.sqrt(u))
        if inc <= 0.0:
            break
        k = 1
        if leap_tol > 0.0:
            k = int(leap_tol * u / inc)
            if k >= 2:
                um = min(u + 0.5 * k * inc, 1.0)
                inc = coef * rate(math.sqrt(um))
            else:
                k = 1
        k = min(k, t_max - t)
        u_new = u + k * inc
        t_new = t + k
        if t_cross < 0 and u_new >= u_target:
            t_cross = min(t + int(math.ceil((u_target - u) / inc)), t_new)
        while k_rec < len(rec_t) and rec_t[k_rec] <= t_new:
            rec_u[k_rec] = u + (rec_t[k_rec] - t) * inc
            k_rec += 1
        u, t = u_new, t_new
    return rec_u, t, u, t_cross


def _scalar_interp(xs, ys, x):
    # bisect on python lists; keeps the fallback loop free of array allocation
    from bisect import bisect_left

    n = len(xs)
    if x <= xs[0]:
        return ys[0]
    if x >= xs[-1]:
        return ys[-1]
    i = bisect_left(xs, x)
    if xs[i] == x:
        return ys[i]
    w = (x - xs[i - 1]) / (xs[i] - xs[i - 1])
    return ys[i - 1] + w * (ys[i] - ys[i - 1])
