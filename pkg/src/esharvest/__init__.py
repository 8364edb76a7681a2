"""Lumped-element simulation and design tools for electrostatic vibration harvesters."""

from .design import optimize_design, pitch_scaling_study, sweep_load, tune_resonance
from .errors import (
    ConfigError, DomainError, FitError, HarvesterError, InfeasibleError, InvalidDesignError,
    NumericalFailure, PullInError,
)
from .fit import CapMeasurement, fit_cap_profile
from .model import (
    CapProfile, CombGeometry, HarvesterDesign, MechanicalParams, Polarization, cap_at, dcap_dz,
    electrostatic_force, stored_energy, validate_design,
)
from .smallsignal import clipped_band, harmonic_response, matched_load, reflected_impedance
from .transient import Excitation, SimParams, auto_sim_params, simulate

__all__ = [
    "CapMeasurement", "CapProfile", "CombGeometry", "ConfigError", "DomainError", "Excitation",
    "FitError", "HarvesterDesign", "HarvesterError", "InfeasibleError", "InvalidDesignError",
    "MechanicalParams", "NumericalFailure", "Polarization", "PullInError", "SimParams",
    "auto_sim_params", "cap_at", "clipped_band", "dcap_dz", "electrostatic_force",
    "fit_cap_profile", "harmonic_response", "matched_load", "optimize_design",
    "pitch_scaling_study", "reflected_impedance", "simulate", "stored_energy", "sweep_load",
    "tune_resonance", "validate_design",
]
