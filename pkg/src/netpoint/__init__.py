"""Bearing-only cooperative target localization and target-pointing consensus."""
from .analysis import StabilityCertificate, certify
from .engine import SimState, SimTrace, initial_state, random_headings, run, step
from .errors import (
    DegenerateBearingError,
    DivergenceError,
    InputError,
    NetPointError,
    ScenarioError,
)
from .scenario import Scenario, build_scenario, load_scenario, reference_scenario
from .topology import Topology

__version__ = "0.1.0"

__all__ = [
    "DegenerateBearingError",
    "DivergenceError",
    "InputError",
    "NetPointError",
    "Scenario",
    "ScenarioError",
    "SimState",
    "SimTrace",
    "StabilityCertificate",
    "Topology",
    "build_scenario",
    "certify",
    "initial_state",
    "load_scenario",
    "reference_scenario",
    "random_headings",
    "run",
    "step",
]
