"""Breakdown certificates and simulations for relativistic fluids with
causal bulk viscosity."""

from .constitutive import ConstitutiveSet, abar_bound, ideal_gas_set, sound_speed_sq, validate_assumptions
from .state import ConstantState, FluidState, is_physical
from .certifier import Certificate, ShellData, certify, find_sigma0
from .solver import Grid1D, simulate

__all__ = [
    "ConstitutiveSet", "abar_bound", "ideal_gas_set", "sound_speed_sq", "validate_assumptions",
    "ConstantState", "FluidState", "is_physical",
    "Certificate", "ShellData", "certify", "find_sigma0",
    "Grid1D", "simulate",
]
