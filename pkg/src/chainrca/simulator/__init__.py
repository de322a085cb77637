"""Synthetic microservice systems with injected faults, plus detector training corpora."""

from .baseline import BaselineParams, generate_baseline, incident_hours
from .faults import FaultSpec, GroundTruth, inject_fault, propagation_hops
from .scenarios import PRESETS, Incident, ScenarioPreset, build_scenario, get_preset, incident_set, make_incident
from .topology import Topology, example_topology, generate_topology

__all__ = [
    "BaselineParams",
    "FaultSpec",
    "GroundTruth",
    "Incident",
    "PRESETS",
    "ScenarioPreset",
    "Topology",
    "build_scenario",
    "example_topology",
    "generate_baseline",
    "generate_topology",
    "get_preset",
    "incident_hours",
    "incident_set",
    "inject_fault",
    "make_incident",
    "propagation_hops",
]
