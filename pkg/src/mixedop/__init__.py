"""Numerical laboratory for the mixed local-nonlocal operator -Lap + (-Lap)^s."""
from .grid import Grid, ReflectionMap, build_box, build_disc, build_interval, build_strip, reflect
from .kernel import (
    FarConstants,
    Field,
    MixedOperator,
    ZERO,
    apply,
    assemble,
    bilinear_form,
    negative_part,
    positive_part,
    rho_energy,
)

__all__ = [
    "FarConstants",
    "Field",
    "Grid",
    "MixedOperator",
    "ReflectionMap",
    "ZERO",
    "apply",
    "assemble",
    "bilinear_form",
    "build_box",
    "build_disc",
    "build_interval",
    "build_strip",
    "negative_part",
    "positive_part",
    "reflect",
    "rho_energy",
]

__version__ = "0.1.0"
