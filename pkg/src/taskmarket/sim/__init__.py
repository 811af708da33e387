"""Deterministic scenario runner and invariant checker for the kernel."""

from .runner import SimReport, check_properties, emit_metrics, run_scenario
from .scenario import Scenario, load_scenario

__all__ = ["Scenario", "SimReport", "check_properties", "emit_metrics",
           "load_scenario", "run_scenario"]
