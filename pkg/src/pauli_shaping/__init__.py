"""Pauli shaping for noisy R_ZZ gates: PTM algebra, noise models, quasi-probability
shaping, shot-level simulation, learning schemes and closed-form analysis."""

from .errors import (CapacityError, DimensionError, InconsistentInputs, PauliShapingError,
                     SingularError, StrongNoiseRegime, UnreachableTarget, UnsupportedError,
                     ValidationError)
from .paulis import PauliIndex, walsh_matrix
from .ptm import BlochVector, PauliChannel, Ptm, is_cptp, rzz_ptm, twirl
from .shaping import ShapingPlan, characteristic_matrix, quasi_probs

__version__ = "0.1.0"

__all__ = [
    "BlochVector", "CapacityError", "DimensionError", "InconsistentInputs", "PauliChannel",
    "PauliIndex", "PauliShapingError", "Ptm", "ShapingPlan", "SingularError",
    "StrongNoiseRegime", "UnreachableTarget", "UnsupportedError", "ValidationError",
    "characteristic_matrix", "is_cptp", "quasi_probs", "rzz_ptm", "twirl", "walsh_matrix",
]
