"""Simulator for continuous-variable teleportation of Gaussian states."""

__version__ = "0.1.0"

from .errors import ConfigError, CorruptState, InvalidParameter
from .gaussian import GaussianState, Quadrature, coherent, vacuum
from .metrics import fidelity_from_variances, fidelity_theory, n_sequential
from .teleporter import TeleporterConfig, run_heisenberg, run_monte_carlo

__all__ = [
    "ConfigError",
    "CorruptState",
    "GaussianState",
    "InvalidParameter",
    "Quadrature",
    "TeleporterConfig",
    "coherent",
    "fidelity_from_variances",
    "fidelity_theory",
    "n_sequential",
    "run_heisenberg",
    "run_monte_carlo",
    "vacuum",
]
