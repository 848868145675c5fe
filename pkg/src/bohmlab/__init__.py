"""Semiclassical limits of Bohmian and Wigner phase-space measures on periodic grids."""
from .core import (Bump, Grid, Potential, TestFunction, WaveFunction, free_potential, gaussian_state,
                   harmonic_potential, lorentzian_potential, plane_wave)
from .errors import (BohmlabError, ConfigError, ConvergenceError, DegenerateStateError, DomainEscapeError,
                     InstabilityError, InvalidStateError, SupportError)
from .schrodinger import PropagatorConfig, Timeline, energy, mass, propagate
from .hydrodynamics import HydroFields, extract_fields, kinetic_split, static_bound
from .bohmian import TrajectoryEnsemble, bohmian_measure, integrate_dynamic, integrate_kinematic
from .wigner import WignerField, husimi, wigner_transform
from .classical_limit import EpsSequence, FitResult, extrapolate, fit_rate, teq_check
from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .runner import ConvergenceReport, run_experiment

__version__ = "0.1.0"

__all__ = [
    "Bump", "Grid", "Potential", "TestFunction", "WaveFunction", "free_potential", "gaussian_state",
    "harmonic_potential", "lorentzian_potential", "plane_wave",
    "BohmlabError", "ConfigError", "ConvergenceError", "DegenerateStateError", "DomainEscapeError",
    "InstabilityError", "InvalidStateError", "SupportError",
    "PropagatorConfig", "Timeline", "energy", "mass", "propagate",
    "HydroFields", "extract_fields", "kinetic_split", "static_bound",
    "TrajectoryEnsemble", "bohmian_measure", "integrate_dynamic", "integrate_kinematic",
    "WignerField", "husimi", "wigner_transform",
    "EpsSequence", "FitResult", "extrapolate", "fit_rate", "teq_check",
    "ExperimentConfig", "load_config", "parse_config", "serialize_config",
    "ConvergenceReport", "run_experiment",
]
