"""PV-fed modular multilevel converter with distributed MPPT and predictive switching."""

from .config import ScenarioConfig, builtin_presets, preset
from .engine import SimResult, Trace, run_scenario, summarize
from .errors import (ConfigurationError, InvalidInputError, NumericalDivergenceError,
                     ScenarioParseError)
from .grid import GridModel
from .mmc import LegState, MmcParams
from .pv import EnvironmentSample, IrradianceProfile, PvModuleParams

__all__ = [
    "ConfigurationError", "EnvironmentSample", "GridModel", "InvalidInputError",
    "IrradianceProfile", "LegState", "MmcParams", "NumericalDivergenceError",
    "PvModuleParams", "ScenarioConfig", "ScenarioParseError", "SimResult", "Trace",
    "builtin_presets", "preset", "run_scenario", "summarize",
]
