"""Reproducible experiment driver: configs, seeded trials, reports, CLI."""
from .config import (
    SCHEMAS,
    ConfigError,
    Scenario,
    ScenarioConfig,
    config_from_dict,
    default_config,
    load_config,
)
from .report import REPORT_SCHEMA, MetricSummary, ScenarioReport, emit_report, emit_sweep
from .runner import InvariantViolation, parse_sweep, run_scenario, run_sweep

__all__ = [
    "SCHEMAS", "ConfigError", "Scenario", "ScenarioConfig", "config_from_dict",
    "default_config", "load_config", "REPORT_SCHEMA", "MetricSummary", "ScenarioReport",
    "emit_report", "emit_sweep", "InvariantViolation", "parse_sweep", "run_scenario", "run_sweep",
]
