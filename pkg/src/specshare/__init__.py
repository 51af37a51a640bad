"""Discrete-event simulator of cellular providers sharing idle licensed
channels through a network of cognitive-radio sensing nodes."""

from .config import ConfigError, ScenarioConfig, config_from_dict, load_config
from .engine import RunResult, Simulation, SimulationError, run
from .topology import build_topology

__all__ = [
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "Simulation",
    "SimulationError",
    "build_topology",
    "config_from_dict",
    "load_config",
    "run",
]

__version__ = "0.1.0"
