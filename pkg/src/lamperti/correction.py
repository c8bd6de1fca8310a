"""Correction operator applied to the state before the explicit drift is evaluated.

For a globally Lipschitz remainder drift the operator is the identity. Otherwise
it clamps the state into ``[C_s * h**beta, C_l * h**(-alpha)]``, with exponents
taken from the extremal degrees of the remainder drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .flp import FLP, degrees

IDENTITY = "identity"
CLAMP = "clamp"


@dataclass(frozen=True)
class CorrectionConfig:
    mode: str = IDENTITY
    C_s: float = 1.0
    C_l: float = 1.0
    beta: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.mode not in (IDENTITY, CLAMP):
            raise ValueError(f"unknown correction mode {self.mode!r}")
        if self.mode == CLAMP:
            if not (self.C_s > 0 and self.C_l > 0):
                raise ValueError("clamp scales C_s, C_l must be positive")
            if not 0 < self.beta < 2:
                raise ValueError(f"beta must lie in (0, 2), got {self.beta!r}")
            if not self.alpha >= 0:
                raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")

    @property
    def m1(self) -> float:
        """Consistency exponent at 0+ (reporting only)."""
        return (2.0 - self.beta) / self.beta if self.mode == CLAMP else 0.0

    @property
    def m2(self) -> float:
        """Consistency exponent at infinity; inf when there is no upper clamp."""
        if self.mode != CLAMP:
            return 0.0
        return (2.0 + self.alpha) / self.alpha if self.alpha > 0 else math.inf

    def bounds(self, h: float) -> tuple[float, float]:
        """Clamp window ``(lo, hi)`` at step ``h``; ``(0, inf)`` for the identity."""
        if self.mode == IDENTITY:
            return 0.0, math.inf
        lo = self.C_s * h**self.beta
        hi = self.C_l * h ** (-self.alpha) if self.alpha > 0 else math.inf
        return lo, hi

    def check(self, h: float, strict: bool = True) -> None:
        """Validate the clamp window at ``h``.

        Experiments require ``lo < hi``; a single-point window (``strict=False``)
        still defines a valid operator and is accepted for plain stepping.
        """
        if not 0 < h <= 1:
            raise ValueError(f"step size must lie in (0, 1], got {h!r}")
        lo, hi = self.bounds(h)
        if lo > hi or (strict and lo == hi):
            raise ValueError(f"empty clamp window at h={h!r}: C_s*h^beta={lo!r}, C_l*h^-alpha={hi!r}")

    def with_scales(self, C_s: float | None = None, C_l: float | None = None) -> "CorrectionConfig":
        return replace(
            self,
            C_s=self.C_s if C_s is None else float(C_s),
            C_l=self.C_l if C_l is None else float(C_l),
        )

    def as_dict(self) -> dict:
        return {"mode": self.mode, "C_s": self.C_s, "C_l": self.C_l,
                "beta": self.beta, "alpha": self.alpha, "m1": self.m1, "m2": self.m2}


def make_correction(mu_hat: FLP, C_s: float = 1.0, C_l: float = 1.0) -> CorrectionConfig:
    if mu_hat.is_zero:
        return CorrectionConfig(IDENTITY)
    dm, _, dp, _ = degrees(mu_hat)
    if dm >= 0.0 and dp <= 1.0:
        return CorrectionConfig(IDENTITY)
    # dm >= 0 here implies dp > 1: only the upper side needs taming; beta is
    # then irrelevant in practice but must stay in (0, 2), so fall back to 1/2
    beta = 1.0 / (2.0 * (1.0 - dm)) if dm < 0.0 else 0.5
    alpha = 1.0 / (2.0 * dp) if dp > 0.0 else 0.0
    return CorrectionConfig(CLAMP, float(C_s), float(C_l), beta, alpha)


def apply(cfg: CorrectionConfig, h: float, x):
    """Apply the operator at step ``h`` to ``x > 0`` (scalar or array)."""
    if cfg.mode == IDENTITY:
        return x
    lo, hi = cfg.bounds(h)
    out = np.minimum(np.maximum(x, lo), hi)
    return float(out) if np.ndim(out) == 0 else out
