"""Experiment presets, convergence tables and the command-line interface."""

from .convergence import ConvergenceTable, RefinementError, convergence_rates, read_error_csv, restrict_1d
from .presets import PRESETS, ExperimentConfig, PresetError, RunBundle, resolve_config, run_preset

__all__ = [
    "ConvergenceTable", "RefinementError", "convergence_rates", "read_error_csv", "restrict_1d",
    "PRESETS", "ExperimentConfig", "PresetError", "RunBundle", "resolve_config", "run_preset",
]
