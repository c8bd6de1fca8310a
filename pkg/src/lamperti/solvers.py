"""Step kernels in transformed coordinates and whole-path simulation.

Two schemes are provided:

``proposed``
    ``Y+ = P(Y) + c*h/Y+ + mu_hat(P(Y))*h + sigma*dW``. The implicit part is
    only the ``c/x`` term, so ``Y+`` is the positive root of a quadratic.
``lbem``
    Drift-implicit backward Euler, ``Y+ = Y + mu(Y+)*h + sigma*dW``, solved
    by safeguarded Newton. Used as the reference scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .flp import osl_constant_probe
from .models import ModelSpec

LBEM_FLOOR = 1e-8


class SchemeKind(str, Enum):
    PROPOSED = "proposed"
    LBEM = "lbem"


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class PathOutput:
    times: np.ndarray
    y_transformed: np.ndarray
    x_original: np.ndarray


@dataclass(frozen=True)
class StepArgs:
    """Kernel-ready view of a model at a fixed step size."""

    h: float
    y0: float
    sigma: float
    c_minus_one: float
    mu_coefs: np.ndarray
    mu_exps: np.ndarray
    hat_coefs: np.ndarray
    hat_exps: np.ndarray
    lo: float
    hi: float
    floor: float

    @classmethod
    def of(cls, spec: ModelSpec, h: float) -> "StepArgs":
        if not 0 < h <= 1:
            raise ValueError(f"step size must lie in (0, 1], got {h!r}")
        spec.correction.check(h, strict=False)
        lo, hi = spec.correction.bounds(h)
        return cls(
            h=float(h),
            y0=spec.y0,
            sigma=spec.sigma,
            c_minus_one=spec.c_minus_one,
            mu_coefs=spec.mu.coefficients,
            mu_exps=spec.mu.exponents,
            hat_coefs=spec.mu_hat.coefficients,
            hat_exps=spec.mu_hat.exponents,
            lo=lo,
            hi=hi,
            floor=lo if lo > 0 else LBEM_FLOOR,
        )


def positive_root(a: float, q: float) -> float:
    """Unique ``y > 0`` with ``y - q/y = a``."""
    if not q > 0:
        raise ValueError(f"q must be > 0, got {q!r}")
    return float(kernels.positive_root(float(a), float(q)))


def explicit_step(spec: ModelSpec, h: float, y_n: float, dW: float) -> float:
    s = StepArgs.of(spec, h)
    if not y_n > 0:
        raise ValueError(f"state must be > 0, got {y_n!r}")
    return float(kernels.explicit_step(
        float(y_n), s.h, float(dW), s.hat_coefs, s.hat_exps, s.c_minus_one, s.sigma, s.lo, s.hi
    ))


def lbem_step(spec: ModelSpec, h: float, y_n: float, dW: float) -> float:
    s = StepArgs.of(spec, h)
    if not y_n > 0:
        raise ValueError(f"state must be > 0, got {y_n!r}")
    y, status = kernels.lbem_step(float(y_n), s.h, float(dW), s.mu_coefs, s.mu_exps, s.sigma, s.floor)
    if status != 0 or not y > 0:
        raise SolverFailure(
            f"LBEM Newton failed: model={spec.tag} h={h!r} rhs={y_n + spec.sigma * dW!r}"
        )
    return float(y)


def lbem_stable_step(spec: ModelSpec, x_lo: float = 1e-3, x_hi: float = 1e3) -> float:
    """Largest h with ``h * L0 < 1`` for the probed one-sided Lipschitz bound ``L0``."""
    L0 = osl_constant_probe(spec.mu, x_lo, x_hi, 10_000)
    return math.inf if L0 <= 0 else 1.0 / L0


def simulate_transformed(spec: ModelSpec, scheme: SchemeKind | str, h: float,
                         increments: np.ndarray) -> np.ndarray:
    """Run many paths at once; ``increments`` has shape ``(n_paths, n_steps)``.

    Returns transformed states of shape ``(n_paths, n_steps + 1)``.
    """
    scheme = SchemeKind(scheme)
    incs = np.ascontiguousarray(increments, dtype=np.float64)
    if incs.ndim != 2:
        raise ValueError("increments must be 2-d (paths x steps)")
    s = StepArgs.of(spec, h)
    if scheme is SchemeKind.PROPOSED:
        return kernels.explicit_paths(s.y0, incs, s.h, s.hat_coefs, s.hat_exps,
                                      s.c_minus_one, s.sigma, s.lo, s.hi)
    out, failed_at = kernels.lbem_paths(s.y0, incs, s.h, s.mu_coefs, s.mu_exps, s.sigma, s.floor)
    bad = np.flatnonzero(failed_at >= 0)
    if bad.size:
        i = int(bad[0])
        j = int(failed_at[i])
        raise SolverFailure(
            f"LBEM Newton failed: model={spec.tag} h={h!r} path={i} step={j} "
            f"state={out[i, j]!r} dW={incs[i, j]!r}"
        )
    return out


def simulate_path(spec: ModelSpec, scheme: SchemeKind | str, h: float,
                  increments) -> PathOutput:
    incs = np.asarray(increments, dtype=np.float64).reshape(1, -1)
    y = simulate_transformed(spec, scheme, h, incs)[0]
    times = h * np.arange(y.size)
    return PathOutput(times, y, spec.transform.inverse(y))
