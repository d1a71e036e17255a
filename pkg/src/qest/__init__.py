"""Multiparameter quantum estimation: information matrices, Cramer-Rao-type
bounds (SLD, RLD, Holevo via a built-in SDP solver), model classification,
superresolution imaging, multiphase interferometry and Monte-Carlo estimation.
"""

__version__ = "0.1.0"

from .config import Tolerances, get_tolerances, tolerances
from .model import ModelPoint, StatisticalModel, evaluate
from .information import Povm, classical_fi, qfi_matrices, incompatibility_R, upsilon
from .bounds import (
    compute_bounds,
    holevo_bound,
    nuisance_bound,
    scalar_rld_bound,
    scalar_sld_bound,
    upper_bound_chain,
)
from .classify import classify

__all__ = [
    "Tolerances", "get_tolerances", "tolerances",
    "ModelPoint", "StatisticalModel", "evaluate",
    "Povm", "classical_fi", "qfi_matrices", "incompatibility_R", "upsilon",
    "compute_bounds", "holevo_bound", "nuisance_bound", "scalar_rld_bound",
    "scalar_sld_bound", "upper_bound_chain", "classify",
]
