"""Scalar step kernels.

Written in the numba-compatible subset of Python; compiled when numba is on and
run as plain Python otherwise. FLPs are passed as parallel ``coefs``/``exps``
float64 arrays.
"""

import math

from ._jit import jit

_EPS = 2.220446049250313e-16


@jit
def positive_root(a, q):
    # unique y > 0 with y - q/y = a; second branch avoids cancellation for a << 0
    if abs(a) < 1e150:
        d = math.sqrt(a * a + 4.0 * q)
    else:
        d = math.hypot(a, 2.0 * math.sqrt(q))
    if a >= 0.0:
        return 0.5 * (a + d)
    return 2.0 * q / (d - a)


@jit
def flp_value(coefs, exps, x):
    v = 0.0
    lx = 0.0
    have_log = False
    for i in range(coefs.shape[0]):
        s = exps[i]
        if s == 1.0:
            v += coefs[i] * x
        elif s == -1.0:
            v += coefs[i] / x
        elif s == 0.0:
            v += coefs[i]
        else:
            if not have_log:
                lx = math.log(x)
                have_log = True
            v += coefs[i] * math.exp(s * lx)
    return v


@jit
def flp_value_and_slope(coefs, exps, x):
    v = 0.0
    sv = 0.0
    lx = 0.0
    have_log = False
    for i in range(coefs.shape[0]):
        s = exps[i]
        if s == 1.0:
            t = coefs[i] * x
        elif s == -1.0:
            t = coefs[i] / x
        elif s == 0.0:
            t = coefs[i]
        else:
            if not have_log:
                lx = math.log(x)
                have_log = True
            t = coefs[i] * math.exp(s * lx)
        v += t
        sv += s * t
    return v, sv / x


@jit
def explicit_step(y, h, dw, coefs_hat, exps_hat, c_minus_one, sigma, lo, hi):
    z = min(max(y, lo), hi)
    a = z + flp_value(coefs_hat, exps_hat, z) * h + sigma * dw
    return positive_root(a, c_minus_one * h)


@jit
def lbem_step(y, h, dw, coefs, exps, sigma, floor):
    """Solve ``x - h*mu(x) = y + sigma*dw`` for x > 0.

    Newton with a maintained bracket ``(lo, hi)``; steps leaving the bracket
    fall back to doubling, halving or bisection. Returns ``(x, status)`` with
    status 0 on convergence and 1 when the iteration cap is hit.
    """
    rhs = y + sigma * dw
    tol = 1e-12 * max(1.0, abs(rhs))
    x = max(rhs, floor)
    lo = 0.0
    hi = math.inf
    for _ in range(100):
        m, dm = flp_value_and_slope(coefs, exps, x)
        g = x - h * m - rhs
        if abs(g) <= tol:
            return x, 0
        if g > 0.0:
            hi = x
        else:
            lo = x
        if hi < math.inf and hi - lo <= 4.0 * _EPS * hi:
            return x, 0
        dg = 1.0 - h * dm
        xn = x - g / dg if dg > 0.0 else math.nan
        if not (lo < xn < hi):
            if hi == math.inf:
                xn = 2.0 * x
            elif lo == 0.0:
                xn = 0.5 * hi
            else:
                xn = 0.5 * (lo + hi)
        x = xn
    return x, 1
