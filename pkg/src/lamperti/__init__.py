"""Explicit positivity-preserving Lamperti schemes for scalar financial SDEs."""

__version__ = "0.1.0"

from .flp import FLP
from .models import ModelKind, ModelSpec, PowerTransform, build_model, model_from_config, preset_config
from .solvers import SchemeKind, explicit_step, lbem_step, positive_root, simulate_path

__all__ = [
    "FLP",
    "ModelKind",
    "ModelSpec",
    "PowerTransform",
    "SchemeKind",
    "build_model",
    "explicit_step",
    "lbem_step",
    "model_from_config",
    "positive_root",
    "preset_config",
    "simulate_path",
]
