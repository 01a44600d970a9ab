"""Scenario loading, the simulation loop, metrics and the CLI."""

from .metrics import (
    RunMetrics,
    false_positive_rate,
    load_summary,
    paired_analysis,
    recompute_metrics,
    report,
)
from .scenario import AgentSpec, Scenario, ScenarioError, load_scenario, parse_scenario
from .sim import SimFault, Simulation, run_scenario

__all__ = [
    "AgentSpec", "RunMetrics", "Scenario", "ScenarioError", "SimFault",
    "Simulation", "false_positive_rate", "load_scenario", "load_summary",
    "paired_analysis", "parse_scenario", "recompute_metrics", "report",
    "run_scenario",
]
