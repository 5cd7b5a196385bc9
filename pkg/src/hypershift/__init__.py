"""A common hypercyclic vector for the multiples zB of the backward shift on l2, |z| > 1."""

__version__ = "0.1.0"

from .errors import (BudgetExceeded, ConfigError, DivergenceViolated, HypershiftError,
                     NoWitnessInBudget, OutOfReach, PrecisionUndecidable)
from .hvector import HVector
from .multiplier import Multiplier
from .schedule import Schedule, ScheduleConfig
from .slowfn import CycleMap, parse_density
from .targets import enumerate_target
from .verify import covering_check, density_demo, hypercyclicity_check, reverify

__all__ = [
    "BudgetExceeded", "ConfigError", "CycleMap", "DivergenceViolated", "HVector", "HypershiftError",
    "Multiplier", "NoWitnessInBudget", "OutOfReach", "PrecisionUndecidable", "Schedule",
    "ScheduleConfig", "covering_check", "density_demo", "enumerate_target", "hypercyclicity_check",
    "parse_density", "reverify",
]
