"""Model catalog and power-law Lamperti transforms.

Every built-in model has diffusion ``g(x) = c * x**p``, so its Lamperti map is
a power law ``L(x) = scale * x**power``. The transformed SDE
``dX = mu(X) dt + sigma dW`` has an FLP drift that is written out in closed
form per model below.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

from .correction import CorrectionConfig, make_correction
from .flp import FLP, DomainError, certify_osl, split_drift

CIR = "cir"
HESTON32 = "heston32"
CEV = "cev"
AIT_SAHALIA = "ait_sahalia"
CUSTOM = "custom"

PARAM_NAMES: dict[str, tuple[str, ...]] = {
    CIR: ("kappa", "theta", "sigma"),
    HESTON32: ("a1", "a2", "a3"),
    CEV: ("kappa", "theta", "sigma", "d"),
    AIT_SAHALIA: ("alpha_m1", "alpha0", "alpha1", "alpha2", "alpha3", "r", "rho"),
    CUSTOM: ("sigma", "scale", "power"),
}

_TAG_ALIASES = {
    "cir": CIR,
    "heston32": HESTON32, "heston-3/2": HESTON32, "heston": HESTON32,
    "cev": CEV,
    "ait_sahalia": AIT_SAHALIA, "ait-sahalia": AIT_SAHALIA, "aitsahalia": AIT_SAHALIA,
    "custom": CUSTOM,
}


class ModelValidationError(ValueError):
    pass


def normalize_tag(tag: str) -> str:
    try:
        return _TAG_ALIASES[tag.strip().lower()]
    except KeyError:
        raise ModelValidationError(f"unknown model tag {tag!r}") from None


@dataclass(frozen=True)
class PowerTransform:
    """``L(x) = scale * x**power`` on (0, inf) with its exact inverse."""

    scale: float
    power: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ModelValidationError(f"transform scale must be > 0, got {self.scale!r}")
        if self.power == 0 or not math.isfinite(self.power):
            raise ModelValidationError(f"transform power must be finite and nonzero, got {self.power!r}")

    def forward(self, x):
        _require_positive(x)
        if np.ndim(x):
            return self.scale * np.asarray(x, dtype=np.float64) ** self.power
        return self.scale * float(x) ** self.power

    def inverse(self, y):
        _require_positive(y)
        if np.ndim(y):
            return (np.asarray(y, dtype=np.float64) / self.scale) ** (1.0 / self.power)
        return (float(y) / self.scale) ** (1.0 / self.power)


def _require_positive(x):
    if np.any(~(np.asarray(x) > 0)):
        raise DomainError(f"argument must be > 0, got {x!r}")


@dataclass(frozen=True)
class ModelKind:
    """Model tag plus named parameters.

    ``mu`` is only used (and required) for ``custom`` models, whose ``params``
    carry ``sigma`` and the transform ``scale``/``power``.
    """

    tag: str
    params: Mapping[str, float]
    mu: Optional[FLP] = None

    def __post_init__(self):
        tag = normalize_tag(self.tag)
        object.__setattr__(self, "tag", tag)
        expected = set(PARAM_NAMES[tag])
        given = set(self.params)
        if given != expected:
            missing, extra = sorted(expected - given), sorted(given - expected)
            raise ModelValidationError(
                f"model {tag}: missing params {missing}, unknown params {extra}"
            )
        clean = {k: float(self.params[k]) for k in PARAM_NAMES[tag]}
        if not all(math.isfinite(v) for v in clean.values()):
            raise ModelValidationError(f"model {tag}: non-finite parameter in {clean}")
        object.__setattr__(self, "params", MappingProxyType(clean))
        if tag == CUSTOM and self.mu is None:
            raise ModelValidationError("custom model requires an FLP drift 'mu'")
        if tag != CUSTOM and self.mu is not None:
            raise ModelValidationError("'mu' is only accepted for custom models")
        _validate_params(tag, clean)


def _validate_params(tag: str, p: Mapping[str, float]) -> None:
    def positive(*names):
        bad = [n for n in names if not p[n] > 0]
        if bad:
            raise ModelValidationError(f"model {tag}: parameters {bad} must be > 0 ({dict(p)})")

    if tag in (CIR, CEV):
        positive("kappa", "theta", "sigma")
    if tag == CIR:
        lhs, rhs = 2 * p["kappa"] * p["theta"], p["sigma"] ** 2
        if lhs < rhs:
            raise ModelValidationError(
                f"Feller condition violated: 2*kappa*theta={lhs!r} < sigma^2={rhs!r}"
            )
    elif tag == CEV:
        if not 0.5 < p["d"] < 1:
            raise ModelValidationError(f"CEV requires 0.5 < d < 1, got d={p['d']!r}")
    elif tag == HESTON32:
        positive("a1", "a2", "a3")
    elif tag == AIT_SAHALIA:
        positive("alpha_m1", "alpha0", "alpha1", "alpha2", "alpha3")
        if not (p["r"] > 1 and p["rho"] > 1):
            raise ModelValidationError(f"Ait-Sahalia requires r, rho > 1, got r={p['r']!r}, rho={p['rho']!r}")
        if not p["r"] + 1 > 2 * p["rho"]:
            raise ModelValidationError(
                f"Ait-Sahalia requires the non-critical case r + 1 > 2*rho, got r={p['r']!r}, rho={p['rho']!r}"
            )
    elif tag == CUSTOM:
        if p["sigma"] == 0:
            raise ModelValidationError("custom model: sigma must be nonzero")


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    x0_original: float
    sigma: float
    mu: FLP
    c_minus_one: float
    mu_hat: FLP
    transform: PowerTransform
    correction: CorrectionConfig
    warnings: tuple[str, ...] = field(default=())

    @property
    def tag(self) -> str:
        return self.kind.tag

    @property
    def y0(self) -> float:
        return self.transform.forward(self.x0_original)

    @property
    def feller_boundary(self) -> bool:
        return "feller-boundary" in self.warnings

    def describe(self) -> dict:
        return {
            "model": self.tag,
            "params": dict(self.kind.params),
            "x0": self.x0_original,
            "sigma": self.sigma,
            "mu": str(self.mu),
            "c_minus_one": self.c_minus_one,
            "mu_hat": str(self.mu_hat),
            "transform": {"scale": self.transform.scale, "power": self.transform.power},
            "correction": self.correction.as_dict(),
            "warnings": list(self.warnings),
        }


def feller_index(kappa: float, theta: float, sigma: float) -> float:
    return 2.0 * kappa * theta / sigma**2


def _cir_like(A: float, B: float) -> FLP:
    # mu(x) = A/x - B*x
    return FLP.from_terms([(A, -1.0), (-B, 1.0)])


def transformed_model(kind: ModelKind) -> tuple[PowerTransform, float, FLP]:
    """Lamperti transform, signed additive noise and transformed drift of ``kind``."""
    p = kind.params
    if kind.tag == CIR:
        k, th, s = p["kappa"], p["theta"], p["sigma"]
        return PowerTransform(2.0, 0.5), s, _cir_like(2 * (k * th - s * s / 4), k / 2)
    if kind.tag == HESTON32:
        a1, a2, a3 = p["a1"], p["a2"], p["a3"]
        return PowerTransform(2.0, -0.5), -a3, _cir_like(2 * (a1 + 0.75 * a3 * a3), a1 * a2 / 2)
    if kind.tag == CEV:
        k, th, s, d = p["kappa"], p["theta"], p["sigma"], p["d"]
        e = 1.0 - d
        mu = FLP.from_terms([
            (k * th * e ** (-d / e), -d / e),
            (-d * s * s / (2 * e), -1.0),
            (-k * e, 1.0),
        ])
        return PowerTransform(1.0 / e, e), s, mu
    if kind.tag == AIT_SAHALIA:
        am1, a0, a1, a2, a3 = (p[n] for n in ("alpha_m1", "alpha0", "alpha1", "alpha2", "alpha3"))
        r, rho = p["r"], p["rho"]
        sig = -a3
        e = rho - 1.0
        mu = FLP.from_terms([
            (-am1 * e ** ((rho + 1) / e), (rho + 1) / e),
            (a0 * e ** (rho / e), rho / e),
            (-a1 * e, 1.0),
            (sig * sig * rho / (2 * e), -1.0),
            (a2 * e ** ((rho - r) / e), (rho - r) / e),
        ])
        return PowerTransform(1.0 / e, -e), sig, mu
    return PowerTransform(p["scale"], p["power"]), p["sigma"], kind.mu


def original_coefficients(kind: ModelKind) -> tuple[Callable, Callable, Callable]:
    """Drift ``f``, diffusion ``g`` and ``g'`` in original coordinates (built-in models)."""
    p = kind.params
    if kind.tag == CIR:
        k, th, s = p["kappa"], p["theta"], p["sigma"]
        return (lambda x: k * (th - x), lambda x: s * np.sqrt(x), lambda x: 0.5 * s / np.sqrt(x))
    if kind.tag == HESTON32:
        a1, a2, a3 = p["a1"], p["a2"], p["a3"]
        return (lambda x: a1 * x * (a2 - x), lambda x: a3 * x**1.5, lambda x: 1.5 * a3 * np.sqrt(x))
    if kind.tag == CEV:
        k, th, s, d = p["kappa"], p["theta"], p["sigma"], p["d"]
        return (lambda x: k * (th - x), lambda x: s * x**d, lambda x: d * s * x ** (d - 1))
    if kind.tag == AIT_SAHALIA:
        am1, a0, a1, a2, a3 = (p[n] for n in ("alpha_m1", "alpha0", "alpha1", "alpha2", "alpha3"))
        r, rho = p["r"], p["rho"]
        return (
            lambda x: am1 / x - a0 + a1 * x - a2 * x**r,
            lambda x: a3 * x**rho,
            lambda x: rho * a3 * x ** (rho - 1),
        )
    raise ModelValidationError("original coefficients are not available for custom models")


def build_model(
    kind: ModelKind,
    x0: float,
    c_minus_one: Optional[float] = None,
    C_s: Optional[float] = None,
    C_l: Optional[float] = None,
) -> ModelSpec:
    if not (x0 > 0 and math.isfinite(x0)):
        raise ModelValidationError(f"x0 must be a finite positive number, got {x0!r}")
    notes: list[str] = []
    if kind.tag == CIR:
        p = kind.params
        if 2 * p["kappa"] * p["theta"] == p["sigma"] ** 2:
            notes.append("feller-boundary")
            warnings.warn("CIR parameters sit on the Feller boundary 2*kappa*theta == sigma^2; "
                          "convergence experiments will refuse this model", stacklevel=2)
    transform, sigma, mu = transformed_model(kind)
    if not certify_osl(mu):
        raise ModelValidationError(f"model {kind.tag}: transformed drift is not one-sided Lipschitz")
    c, mu_hat = split_drift(mu, c_minus_one)
    corr = make_correction(mu_hat, C_s=1.0, C_l=10.0 if kind.tag == AIT_SAHALIA else 1.0)
    corr = corr.with_scales(C_s, C_l)
    y0 = transform.forward(x0)
    if not y0 > 0:
        raise ModelValidationError(f"transformed initial value {y0!r} is not positive")
    return ModelSpec(kind, float(x0), float(sigma), mu, c, mu_hat, transform, corr, tuple(notes))


# -- presets -----------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "example-6.1": {"model": CIR, "params": {"kappa": 0.35, "theta": 0.1, "sigma": 0.1}, "x0": 0.1},
    "example-6.2": {"model": HESTON32, "params": {"a1": 0.8, "a2": 0.1, "a3": 0.5}, "x0": math.sin(0.9) ** 2},
    "example-6.3": {"model": CEV, "params": {"kappa": 0.35, "theta": 0.1, "sigma": 0.1, "d": 0.65}, "x0": 0.1},
    "example-6.4": {
        "model": AIT_SAHALIA,
        "params": {"alpha_m1": 1.5, "alpha0": 2.0, "alpha1": 1.0, "alpha2": 2.0, "alpha3": 1.0,
                   "r": 3.0, "rho": 1.5},
        "x0": 0.5,
    },
}

CONFIG_KEYS = {"model", "params", "x0", "c_minus_one", "correction", "mu"}


def preset_config(name: str) -> dict:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ModelValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return {"model": cfg["model"], "params": dict(cfg["params"]), "x0": cfg["x0"]}


def model_from_config(doc: Mapping) -> ModelSpec:
    """Build a model from a config document.

    Keys: ``model``, ``params``, ``x0``, optional ``c_minus_one``, optional
    ``correction`` (``C_s``/``C_l``), and ``mu`` (list of ``[coeff, exponent]``)
    for custom models. Unknown keys are rejected.
    """
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ModelValidationError(f"unknown config keys {sorted(unknown)}")
    for key in ("model", "params", "x0"):
        if key not in doc:
            raise ModelValidationError(f"config is missing {key!r}")
    corr = doc.get("correction") or {}
    bad = set(corr) - {"C_s", "C_l"}
    if bad:
        raise ModelValidationError(f"unknown correction keys {sorted(bad)}")
    mu = None
    if doc.get("mu") is not None:
        try:
            mu = FLP.from_terms((float(c), float(s)) for c, s in doc["mu"])
        except (TypeError, ValueError) as exc:
            raise ModelValidationError(f"bad 'mu' terms: {exc}") from None
    if not isinstance(doc["params"], Mapping):
        raise ModelValidationError("'params' must be an object")
    kind = ModelKind(doc["model"], doc["params"], mu)
    return build_model(
        kind,
        float(doc["x0"]),
        c_minus_one=doc.get("c_minus_one"),
        C_s=corr.get("C_s"),
        C_l=corr.get("C_l"),
    )


def load_model_config(path) -> ModelSpec:
    with open(path) as fh:
        return model_from_config(json.load(fh))
