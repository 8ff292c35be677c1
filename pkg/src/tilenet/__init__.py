"""Substitution tilings of the plane, their separated nets, and comparisons with scaled lattices."""

__version__ = "0.1.0"

from .core import (
    Hierarchy,
    Isometry,
    Patch,
    SubstitutionRule,
    count_types,
    inflate,
    supertile,
    validate_rule,
)
from .rules import chair, load_rule, penrose
from .spectral import spectral_report, substitution_matrix

__all__ = [
    "Hierarchy",
    "Isometry",
    "Patch",
    "SubstitutionRule",
    "chair",
    "count_types",
    "inflate",
    "load_rule",
    "penrose",
    "spectral_report",
    "substitution_matrix",
    "supertile",
    "validate_rule",
]
