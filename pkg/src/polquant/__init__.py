"""Polarized Fedosov quantization on flat models."""

from ._kernels import BACKEND
from .coeff_rings import FourierMode, SchwartzProfile, TrigPoly, schwartz_eval, trig_combine, trig_derivative
from .weyl_algebra import (
    Geometry,
    Truncation,
    WeylElement,
    WeylTerm,
    double_weight_component,
    evaluate_hbar,
    fibrewise_act,
    hodge_apply,
    weyl_commutator,
    weyl_star,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FourierMode",
    "Geometry",
    "SchwartzProfile",
    "TrigPoly",
    "Truncation",
    "WeylElement",
    "WeylTerm",
    "double_weight_component",
    "evaluate_hbar",
    "fibrewise_act",
    "hodge_apply",
    "schwartz_eval",
    "trig_combine",
    "trig_derivative",
    "weyl_commutator",
    "weyl_star",
]
