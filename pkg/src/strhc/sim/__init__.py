"""Scenario runner, traces and figures (figures import matplotlib lazily via :mod:`.plots`)."""
from .runner import RunResult, attack_report, build_costs, first_flag, run_scenario, theorem1_violations, uub_entry
from .scenario import Scenario, ScenarioError, SynthConfig, bundled_scenario, load_or_synthesize, load_scenario
from .trace import SimTrace, StepRecord, export_trace, read_trace

__all__ = [
    "RunResult", "Scenario", "ScenarioError", "SimTrace", "StepRecord", "SynthConfig",
    "attack_report", "build_costs", "bundled_scenario", "export_trace", "first_flag",
    "load_or_synthesize", "load_scenario", "read_trace", "run_scenario", "theorem1_violations", "uub_entry",
]
