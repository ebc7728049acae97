"""Stationary entanglement of two movable mirrors in a driven optical cavity."""
from .model import MirrorMode, PhysicalParams, derive, figure2_params
from .dynamics import Basis, LinearModel, build_cmrel, build_general, stability
from .steadystate import lyapunov_steady, mirror_cm_from_full
from .entanglement import log_negativity, nu_minus

__all__ = [
    "Basis",
    "LinearModel",
    "MirrorMode",
    "PhysicalParams",
    "build_cmrel",
    "build_general",
    "derive",
    "figure2_params",
    "log_negativity",
    "lyapunov_steady",
    "mirror_cm_from_full",
    "nu_minus",
    "stability",
]
