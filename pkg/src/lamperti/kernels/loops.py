"""Compiled path loops (numba route).

The explicit scheme runs time-major: at each step the whole batch of paths is
updated by branch-free inner loops that LLVM can vectorize. LBEM runs
path-major since its Newton iteration count varies per path.
"""

import math

import numpy as np

from ._jit import jit
from .scalar import lbem_step, positive_root


@jit(error_model="numpy")
def _explicit_time_major(y0, incs_t, h, coefs_hat, exps_hat, c_minus_one, sigma, lo, hi):
    m, n = incs_t.shape
    out = np.empty((m + 1, n))
    out[0, :] = y0
    q = c_minus_one * h
    z = np.empty(n)
    acc = np.empty(n)
    for j in range(m):
        y = out[j]
        dw = incs_t[j]
        yn = out[j + 1]
        for i in range(n):
            v = y[i]
            v = v if v > lo else lo
            z[i] = v if v < hi else hi
            acc[i] = 0.0
        for k in range(coefs_hat.shape[0]):
            s = exps_hat[k]
            c = coefs_hat[k]
            if s == 1.0:
                for i in range(n):
                    acc[i] += c * z[i]
            elif s == -1.0:
                for i in range(n):
                    acc[i] += c / z[i]
            elif s == 0.0:
                for i in range(n):
                    acc[i] += c
            else:
                for i in range(n):
                    acc[i] += c * math.exp(s * math.log(z[i]))
        for i in range(n):
            a = z[i] + acc[i] * h + sigma * dw[i]
            acc[i] = a
            d = math.sqrt(a * a + 4.0 * q)
            pos = 0.5 * (a + d)
            neg = 2.0 * q / (d - a)
            yn[i] = pos if a >= 0.0 else neg
        # a*a overflows for |a| >~ 1e154; redo those few with the scalar root
        for i in range(n):
            if not abs(acc[i]) < 1e150:
                yn[i] = positive_root(acc[i], q)
    return out


def explicit_paths(y0, incs, h, coefs_hat, exps_hat, c_minus_one, sigma, lo, hi):
    incs_t = np.ascontiguousarray(np.asarray(incs, dtype=np.float64).T)
    return _explicit_time_major(
        float(y0), incs_t, float(h), coefs_hat, exps_hat, float(c_minus_one), float(sigma), float(lo), float(hi)
    ).T


@jit
def lbem_paths(y0, incs, h, coefs, exps, sigma, floor):
    """Returns ``(paths, failed_at)``; ``failed_at[i]`` is the failing step or -1."""
    n, m = incs.shape
    out = np.empty((n, m + 1))
    failed_at = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        y = y0
        out[i, 0] = y
        for j in range(m):
            y, status = lbem_step(y, h, incs[i, j], coefs, exps, sigma, floor)
            out[i, j + 1] = y
            if status != 0 and failed_at[i] < 0:
                failed_at[i] = j
    return out, failed_at
