"""Scenario-driven multi-peer simulation with latency injection and metrics."""

from hybridsync.sim.metrics import MetricsReport, nearest_rank_percentile
from hybridsync.sim.scenario import Action, ScenarioError, parse_scenario
from hybridsync.sim.topology import LatencySpec, Link, TopologyConfig, inject_delay
from hybridsync.sim.virtual import SimResult, SimulationError, VirtualSim, run_scenario

__all__ = [
    "Action",
    "ScenarioError",
    "parse_scenario",
    "LatencySpec",
    "Link",
    "TopologyConfig",
    "inject_delay",
    "MetricsReport",
    "nearest_rank_percentile",
    "SimResult",
    "SimulationError",
    "VirtualSim",
    "run_scenario",
]
