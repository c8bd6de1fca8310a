"""Fractional Laurent polynomials on (0, inf).

An FLP is a finite sum ``sum_i a_i * x**s_i`` with real coefficients and real,
pairwise distinct exponents. Transformed drifts of the supported models are
all of this form, which is what makes the degree calculus below useful: the
one-sided Lipschitz property, the drift split and the clamp exponents are all
read off the extremal terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import minimize_scalar


class FLPError(ValueError):
    """Base class for FLP errors."""


class DomainError(FLPError):
    pass


class UndefinedDegreesError(FLPError):
    pass


class OutOfScopeError(FLPError):
    """The degree shape is outside what the one-sided Lipschitz criterion covers."""


class SplitFailureError(FLPError):
    pass


@dataclass(frozen=True)
class FLP:
    """Immutable sparse power sum.

    ``terms`` is a tuple of ``(coefficient, exponent)`` pairs sorted strictly
    increasing by exponent; zero coefficients never appear. Build instances
    through :meth:`from_terms`, which merges like exponents.
    """

    terms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        exps = [s for _, s in self.terms]
        if any(b <= a for a, b in zip(exps, exps[1:])):
            raise FLPError("exponents must be strictly increasing")
        if any(c == 0.0 for c, _ in self.terms):
            raise FLPError("zero coefficients must be dropped")

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, float]]) -> "FLP":
        # exact-equality merge; exponents are closed-form reals computed once
        acc: dict[float, float] = {}
        for c, s in terms:
            c, s = float(c), float(s)
            if not (math.isfinite(c) and math.isfinite(s)):
                raise FLPError(f"non-finite term ({c}, {s})")
            acc[s] = acc.get(s, 0.0) + c
        return cls(tuple((c, s) for s, c in sorted(acc.items()) if c != 0.0))

    @classmethod
    def monomial(cls, coeff: float, exponent: float) -> "FLP":
        return cls.from_terms([(coeff, exponent)])

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=np.float64)

    @property
    def exponents(self) -> np.ndarray:
        return np.array([s for _, s in self.terms], dtype=np.float64)

    def coeff_at(self, exponent: float) -> float:
        for c, s in self.terms:
            if s == exponent:
                return c
        return 0.0

    def __call__(self, x):
        return eval_flp(self, x)

    def __add__(self, other: "FLP") -> "FLP":
        return FLP.from_terms(self.terms + other.terms)

    def __sub__(self, other: "FLP") -> "FLP":
        return FLP.from_terms(self.terms + tuple((-c, s) for c, s in other.terms))

    def __neg__(self) -> "FLP":
        return FLP(tuple((-c, s) for c, s in self.terms))

    def __str__(self) -> str:
        return render(self)


def eval_flp(p: FLP, x):
    """Evaluate ``p`` at ``x > 0`` (scalar or array)."""
    xa = np.asarray(x, dtype=np.float64)
    if np.any(~(xa > 0)):
        raise DomainError(f"FLP evaluated outside (0, inf): {x!r}")
    out = np.zeros_like(xa)
    for c, s in p.terms:
        out = out + c * xa**s
    if out.ndim == 0:
        return float(out)
    return out


def derivative(p: FLP) -> FLP:
    return FLP.from_terms((c * s, s - 1.0) for c, s in p.terms if s != 0.0)


def degrees(p: FLP) -> tuple[float, float, float, float]:
    """Return ``(deg_minus, coeff_minus, deg_plus, coeff_plus)``."""
    if p.is_zero:
        raise UndefinedDegreesError("degrees of the zero FLP are undefined")
    (c_lo, s_lo), (c_hi, s_hi) = p.terms[0], p.terms[-1]
    return s_lo, c_lo, s_hi, c_hi


def is_one_sided_lipschitz(p: FLP) -> bool:
    """Degree criterion for the one-sided Lipschitz property.

    Valid only for ``deg_minus < 0 <= deg_plus``: then ``p`` is one-sided
    Lipschitz iff ``coeff_minus > 0`` and (``deg_plus <= 1`` or
    ``coeff_plus < 0``).
    """
    dm, cm, dp, cp = degrees(p)
    if not (dm < 0.0 <= dp):
        raise OutOfScopeError(
            f"criterion needs deg- < 0 <= deg+, got deg-={dm!r}, deg+={dp!r}"
        )
    return cm > 0.0 and (dp <= 1.0 or cp < 0.0)


def _violation(p: FLP) -> str:
    dm, cm, dp, cp = degrees(p)
    if cm <= 0.0:
        return f"coeff- = {cm!r} must be > 0"
    return f"need deg+ <= 1 or coeff+ < 0, got deg+ = {dp!r}, coeff+ = {cp!r}"


def certify_osl(p: FLP) -> bool:
    """One-sided Lipschitz certificate covering the shapes we meet in practice.

    Zero and affine FLPs (exponents within {0, 1}) are certified directly since
    their derivative is constant. Everything else goes through the degree
    criterion, which raises :class:`OutOfScopeError` on other shapes.
    """
    if p.is_zero or all(s in (0.0, 1.0) for _, s in p.terms):
        return True
    return is_one_sided_lipschitz(p)


def osl_constant_probe(p: FLP, x_lo: float, x_hi: float, n_grid: int = 10_000) -> float:
    """Largest value of ``p'`` found on ``[x_lo, x_hi]``.

    Scans a log-spaced grid, then polishes the best grid cell with a bounded
    scalar search so interior maxima are not under-reported.
    """
    if not (0.0 < x_lo < x_hi) or n_grid < 2:
        raise ValueError("need 0 < x_lo < x_hi and n_grid >= 2")
    dp = derivative(p)
    if dp.is_zero:
        return 0.0
    grid = np.geomspace(x_lo, x_hi, n_grid)
    vals = eval_flp(dp, grid)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < n_grid - 1:
        res = minimize_scalar(
            lambda t: -eval_flp(dp, math.exp(t)),
            bounds=(math.log(grid[k - 1]), math.log(grid[k + 1])),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best


def split_drift(mu: FLP, c_override: Optional[float] = None) -> tuple[float, FLP]:
    """Split ``mu = c/x + mu_hat`` with ``c > 0`` and ``mu_hat`` one-sided Lipschitz."""
    if mu.is_zero:
        raise SplitFailureError("cannot split the zero drift")
    dm, cm, _, _ = degrees(mu)
    if c_override is not None:
        if not c_override > 0:
            raise SplitFailureError(f"c_minus_one must be > 0, got {c_override!r}")
        candidates = [float(c_override)]
    elif dm == -1.0:
        candidates = [cm, 0.5 * cm]
    elif dm < -1.0:
        a = abs(mu.coeff_at(-1.0))
        candidates = [a if a > 0 else 1.0]
    else:
        raise SplitFailureError(
            f"deg- = {dm!r} > -1: removing c/x would leave a non one-sided Lipschitz remainder"
        )
    last = ""
    for c in candidates:
        if not c > 0:
            last = f"c_minus_one = {c!r} is not positive (coeff- of mu must be > 0)"
            continue
        mu_hat = mu - FLP.monomial(c, -1.0)
        try:
            ok = certify_osl(mu_hat)
        except OutOfScopeError as exc:
            last = str(exc)
            continue
        if ok:
            return c, mu_hat
        last = _violation(mu_hat)
    raise SplitFailureError(f"mu_hat not one-sided Lipschitz: {last}")


def render(p: FLP) -> str:
    if p.is_zero:
        return "0"
    return " + ".join(f"{c:.17g}*x^{s:.17g}" for c, s in p.terms)
