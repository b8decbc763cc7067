"""Rydberg-dressed magnon dynamics in 1D atom chains.

Exact Ising-plus-drive evolution, second-order effective magnon models,
two-magnon band structure, noisy open-system dynamics and a shot-level
measurement pipeline.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, preset
from .errors import (CapacityError, ConfigError, EstimationError, InconclusiveError, IntegrationError,
                     NumericalError, ResonanceError, RydmagnonError, ValidationError)
from .model import ChainGeometry, DriveParams, SectorBasis, build_ising_hamiltonian

__all__ = [
    "__version__", "ExperimentConfig", "load_config", "preset",
    "ChainGeometry", "DriveParams", "SectorBasis", "build_ising_hamiltonian",
    "RydmagnonError", "ConfigError", "ValidationError", "NumericalError", "CapacityError",
    "ResonanceError", "IntegrationError", "EstimationError", "InconclusiveError",
]
