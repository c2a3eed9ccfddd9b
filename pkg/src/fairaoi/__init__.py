"""Fairness-aware selection-window optimization for sidelink V2X uploads."""

from .config import Settings, load_settings
from .problem import Problem
from .scenario import ScenarioConfig, Vehicle, WindowVector
from .sca import sca_run
from .moead import moead_run

__all__ = ["Settings", "load_settings", "Problem", "ScenarioConfig", "Vehicle",
           "WindowVector", "sca_run", "moead_run"]
__version__ = "0.1.0"
