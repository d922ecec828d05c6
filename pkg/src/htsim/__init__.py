"""Simulation and analysis of delayed bilateral human teleoperation loops."""

__version__ = "0.1.0"

from ._jit import NUMBA_ENABLED
from .architectures import Architecture, GainSet, make_architecture
from .errors import (ConfigError, DivergenceError, HtsimError, NumericalError,
                     PreconditionError)
from .harness import ScenarioConfig, SimResult, Trajectory, run_scenario, simulate, sweep
from .plant import ParameterSet, Surface

__all__ = [
    "NUMBA_ENABLED", "Architecture", "GainSet", "make_architecture", "ConfigError",
    "DivergenceError", "HtsimError", "NumericalError", "PreconditionError",
    "ScenarioConfig", "SimResult", "Trajectory", "run_scenario", "simulate", "sweep",
    "ParameterSet", "Surface", "__version__",
]
