"""Experiment presets, runner, CSV/SVG output and reports."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config_text
from .presets import PRESETS, Preset
from .report import emit_report
from .results import ResultTable, read_table, write_table
from .runner import ExperimentResult, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentResult", "PRESETS", "Preset",
           "ResultTable", "emit_report", "load_config", "parse_config_text", "read_table",
           "run_experiment", "write_table"]
