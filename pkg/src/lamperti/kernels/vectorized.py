"""Pure-numpy route: the time loop stays in Python, work is vectorized over paths.

Arithmetic mirrors :mod:`.scalar` operation for operation so both routes agree to
rounding of the transcendental functions.
"""

import numpy as np

_EPS = np.finfo(np.float64).eps


def positive_root(a, q):
    a = np.asarray(a, dtype=np.float64)
    with np.errstate(over="ignore"):
        d = np.where(np.abs(a) < 1e150, np.sqrt(a * a + 4.0 * q), np.hypot(a, 2.0 * np.sqrt(q)))
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = 2.0 * q / (d - a)
    return np.where(a >= 0.0, 0.5 * (a + d), neg)


def flp_value(coefs, exps, x):
    v = np.zeros_like(x)
    lx = None
    for c, s in zip(coefs, exps):
        if s == 1.0:
            v += c * x
        elif s == -1.0:
            v += c / x
        elif s == 0.0:
            v += c
        else:
            if lx is None:
                lx = np.log(x)
            v += c * np.exp(s * lx)
    return v


def flp_value_and_slope(coefs, exps, x):
    v = np.zeros_like(x)
    sv = np.zeros_like(x)
    lx = None
    for c, s in zip(coefs, exps):
        if s == 1.0:
            t = c * x
        elif s == -1.0:
            t = c / x
        elif s == 0.0:
            t = np.full_like(x, c)
        else:
            if lx is None:
                lx = np.log(x)
            t = c * np.exp(s * lx)
        v += t
        sv += s * t
    return v, sv / x


def explicit_step(y, h, dw, coefs_hat, exps_hat, c_minus_one, sigma, lo, hi):
    z = np.minimum(np.maximum(y, lo), hi)
    a = z + flp_value(coefs_hat, exps_hat, z) * h + sigma * dw
    return positive_root(a, c_minus_one * h)


def lbem_step(y, h, dw, coefs, exps, sigma, floor):
    """Vectorized safeguarded Newton; returns ``(x, status)`` arrays."""
    rhs = np.asarray(y + sigma * dw, dtype=np.float64)
    shape = rhs.shape
    rhs = rhs.ravel()
    tol = 1e-12 * np.maximum(1.0, np.abs(rhs))
    x = np.maximum(rhs, floor)
    lo = np.zeros_like(x)
    hi = np.full_like(x, np.inf)
    status = np.ones(x.shape, dtype=np.int64)
    act = np.arange(x.size)
    for _ in range(100):
        if act.size == 0:
            break
        xa, r = x[act], rhs[act]
        m, dm = flp_value_and_slope(coefs, exps, xa)
        g = xa - h * m - r
        done = np.abs(g) <= tol[act]
        pos = g > 0.0
        la = np.where(pos, lo[act], xa)
        ha = np.where(pos, xa, hi[act])
        done |= np.isfinite(ha) & (ha - la <= 4.0 * _EPS * ha)
        dg = 1.0 - h * dm
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(dg > 0.0, xa - g / dg, np.nan)
        bad = ~((la < xn) & (xn < ha))
        fallback = np.where(np.isinf(ha), 2.0 * xa, np.where(la == 0.0, 0.5 * ha, 0.5 * (la + ha)))
        xn = np.where(bad, fallback, xn)
        lo[act], hi[act] = la, ha
        status[act[done]] = 0
        x[act] = np.where(done, xa, xn)
        act = act[~done]
    return x.reshape(shape), status.reshape(shape)


def explicit_paths(y0, incs, h, coefs_hat, exps_hat, c_minus_one, sigma, lo, hi):
    n, m = incs.shape
    out = np.empty((n, m + 1))
    y = np.full(n, float(y0))
    out[:, 0] = y
    for j in range(m):
        y = explicit_step(y, h, incs[:, j], coefs_hat, exps_hat, c_minus_one, sigma, lo, hi)
        out[:, j + 1] = y
    return out


def lbem_paths(y0, incs, h, coefs, exps, sigma, floor):
    n, m = incs.shape
    out = np.empty((n, m + 1))
    failed_at = np.full(n, -1, dtype=np.int64)
    y = np.full(n, float(y0))
    out[:, 0] = y
    for j in range(m):
        y, status = lbem_step(y, h, incs[:, j], coefs, exps, sigma, floor)
        out[:, j + 1] = y
        failed_at[(status != 0) & (failed_at < 0)] = j
    return out, failed_at
