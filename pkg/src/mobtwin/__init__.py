"""Discrete-event simulator of a cloud/edge smart-mobility digital twin."""

from .config import ConfigError, ScenarioConfig, load_scenario, scenario_from_dict
from .planner import (PlannerConfig, RoutePlan, default_route, latency_budget, plan,
                      trigger_distance)
from .scenarios import BUNDLED, resolve
from .sim import Simulation, run
from .world import RoadNetwork, load_network, load_network_file, locate_on_segment

__version__ = "0.1.0"

__all__ = [
    "BUNDLED", "ConfigError", "PlannerConfig", "RoadNetwork", "RoutePlan", "ScenarioConfig",
    "Simulation", "default_route", "latency_budget", "load_network", "load_network_file",
    "load_scenario", "locate_on_segment", "plan", "resolve", "run", "scenario_from_dict",
    "trigger_distance",
]
